#pragma once

#include "uwbdar/types.hpp"

#include <string>
#include <vector>

namespace uwbdar::maps {

enum class MapKind : int { RangeTime = 1, FrequencyTime = 2, RangeDoppler = 3 };

const char* to_string(MapKind k);

struct AxisDescriptor {
    std::string quantity; // "range_bin", "frequency_bin", "slow_time", "doppler_bin"
    double start = 0.0;   // value of the first row/column
    double step = 1.0;    // increment per bin
    std::string units;
};

/// A labeled 2-D representation of one sample in a single domain.
struct DomainMap {
    MapKind kind = MapKind::RangeTime;
    Matrix data;
    AxisDescriptor row_axis;
    AxisDescriptor col_axis;
    Activity label = Activity::Relax;
    int subject_id = 0;
};

struct CropSpec {
    Index row_start = 0;
    Index row_end = 0; // exclusive
    Index col_start = 0;
    Index col_end = 0; // exclusive
};

/// Echo magnitude over range bins x slow-time. `signed_passthrough` keeps the
/// raw signed amplitudes instead.
DomainMap range_map(const PulseMatrix& m, bool signed_passthrough = false);

/// Per-frame spectrum: DFT magnitude of each fast-time column. Output has
/// fast_bins frequency rows and slow_bins columns. Optional log-magnitude
/// (20*log10(eps + |X|)) for visualization only.
DomainMap frequency_map(const PulseMatrix& m, bool log_magnitude = false);

/// Per-range-bin spectrum along slow-time, zero-Doppler centered.
DomainMap range_doppler_map(const PulseMatrix& m, bool log_magnitude = false);

/// Alternative spectrogram axis: collapse range (column sums of the signed
/// data), then run a sliding DFT over slow-time. Not the default path; kept
/// behind an explicit call because the source axis of "frequency data" is a
/// configuration choice.
DomainMap frequency_map_slow_time(const PulseMatrix& m, Index window = 64, Index hop = 1);

DomainMap crop(const DomainMap& map, const CropSpec& spec);

/// Strided slow-time slices of round(window_s * frame_rate) frames; a partial
/// tail is dropped. A window longer than the recording gives an empty list.
std::vector<PulseMatrix> window_slices(const PulseMatrix& m, double window_s, double stride_s);

/// Row-index ranges for the frequency-band ablation, relative to a map with
/// `rows` rows: lower half, upper half, or everything.
enum class Band : int { Lower = 0, Higher = 1, Full = 2 };
const char* to_string(Band b);
CropSpec band_rows(Band band, Index rows, Index cols);

} // namespace uwbdar::maps
