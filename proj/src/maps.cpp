#include "uwbdar/maps.hpp"

#include "uwbdar/dft.hpp"

#include <cmath>

namespace uwbdar::maps {

const char* to_string(MapKind k) {
    switch (k) {
        case MapKind::RangeTime: return "range-time";
        case MapKind::FrequencyTime: return "frequency-time";
        case MapKind::RangeDoppler: return "range-doppler";
    }
    return "?";
}

const char* to_string(Band b) {
    switch (b) {
        case Band::Lower: return "lower";
        case Band::Higher: return "higher";
        case Band::Full: return "full";
    }
    return "?";
}

namespace {

AxisDescriptor slow_time_axis(const PulseMatrix& m) {
    return {"slow_time", 0.0, 1.0 / m.frame_rate, "s"};
}

Matrix maybe_log(Matrix x, bool log_magnitude) {
    if (log_magnitude)
        x = (x.array() + 1e-12).log10() * 20.0;
    return x;
}

} // namespace

DomainMap range_map(const PulseMatrix& m, bool signed_passthrough) {
    validate(m);
    DomainMap out;
    out.kind = MapKind::RangeTime;
    out.data = signed_passthrough ? m.data : m.data.cwiseAbs();
    out.row_axis = {"range_bin", 0.0, 1.0, "bin"};
    out.col_axis = slow_time_axis(m);
    out.label = m.label;
    out.subject_id = m.subject_id;
    return out;
}

DomainMap frequency_map(const PulseMatrix& m, bool log_magnitude) {
    validate(m);
    if (m.fast_bins() < 2)
        throw std::invalid_argument("frequency_map: need at least 2 fast-time bins");
    Matrix spec(m.fast_bins(), m.slow_bins());
    for (Index s = 0; s < m.slow_bins(); ++s)
        spec.col(s) = dft_magnitude(m.data.col(s));
    DomainMap out;
    out.kind = MapKind::FrequencyTime;
    out.data = maybe_log(std::move(spec), log_magnitude);
    out.row_axis = {"frequency_bin", 0.0, 1.0, "bin"};
    out.col_axis = slow_time_axis(m);
    out.label = m.label;
    out.subject_id = m.subject_id;
    return out;
}

DomainMap range_doppler_map(const PulseMatrix& m, bool log_magnitude) {
    validate(m);
    if (m.slow_bins() < 2)
        throw std::invalid_argument("range_doppler_map: need at least 2 slow-time bins");
    const Index n = m.slow_bins();
    Matrix spec(m.fast_bins(), n);
    for (Index f = 0; f < m.fast_bins(); ++f)
        spec.row(f) = fft_shift(dft_magnitude(m.data.row(f).transpose())).transpose();
    DomainMap out;
    out.kind = MapKind::RangeDoppler;
    out.data = maybe_log(std::move(spec), log_magnitude);
    out.row_axis = {"range_bin", 0.0, 1.0, "bin"};
    const double df = m.frame_rate / static_cast<double>(n);
    out.col_axis = {"doppler_bin", -static_cast<double>(n / 2) * df, df, "Hz"};
    out.label = m.label;
    out.subject_id = m.subject_id;
    return out;
}

DomainMap frequency_map_slow_time(const PulseMatrix& m, Index window, Index hop) {
    validate(m);
    if (window < 2 || hop < 1)
        throw std::invalid_argument("frequency_map_slow_time: window >= 2 and hop >= 1 required");
    if (m.slow_bins() < window)
        throw std::invalid_argument("frequency_map_slow_time: recording shorter than window");
    Vector collapsed = m.data.colwise().sum().transpose();
    const Index frames = (m.slow_bins() - window) / hop + 1;
    Matrix spec(window, frames);
    for (Index t = 0; t < frames; ++t)
        spec.col(t) = dft_magnitude(collapsed.segment(t * hop, window));
    DomainMap out;
    out.kind = MapKind::FrequencyTime;
    out.data = std::move(spec);
    out.row_axis = {"doppler_bin", 0.0, m.frame_rate / static_cast<double>(window), "Hz"};
    out.col_axis = {"slow_time", 0.0, static_cast<double>(hop) / m.frame_rate, "s"};
    out.label = m.label;
    out.subject_id = m.subject_id;
    return out;
}

DomainMap crop(const DomainMap& map, const CropSpec& spec) {
    const Index rows = map.data.rows();
    const Index cols = map.data.cols();
    if (spec.row_start < 0 || spec.row_start >= spec.row_end || spec.row_end > rows ||
        spec.col_start < 0 || spec.col_start >= spec.col_end || spec.col_end > cols)
        throw std::invalid_argument("crop: spec out of bounds for " + std::to_string(rows) + "x" +
                                    std::to_string(cols) + " map");
    DomainMap out = map;
    out.data = map.data.block(spec.row_start, spec.col_start, spec.row_end - spec.row_start,
                              spec.col_end - spec.col_start);
    out.row_axis.start += static_cast<double>(spec.row_start) * map.row_axis.step;
    out.col_axis.start += static_cast<double>(spec.col_start) * map.col_axis.step;
    return out;
}

std::vector<PulseMatrix> window_slices(const PulseMatrix& m, double window_s, double stride_s) {
    validate(m);
    const Index win = static_cast<Index>(std::llround(window_s * m.frame_rate));
    const Index stride = std::max<Index>(1, static_cast<Index>(std::llround(stride_s * m.frame_rate)));
    if (win < 1) throw std::invalid_argument("window_slices: window shorter than one frame");
    std::vector<PulseMatrix> out;
    for (Index start = 0; start + win <= m.slow_bins(); start += stride) {
        PulseMatrix slice = m;
        slice.data = m.data.middleCols(start, win);
        out.push_back(std::move(slice));
    }
    return out;
}

CropSpec band_rows(Band band, Index rows, Index cols) {
    switch (band) {
        case Band::Lower: return {0, rows / 2, 0, cols};
        case Band::Higher: return {rows / 2, rows, 0, cols};
        case Band::Full: return {0, rows, 0, cols};
    }
    throw std::invalid_argument("band_rows: unknown band");
}

} // namespace uwbdar::maps
