#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "uwbdar/dft.hpp"
#include "uwbdar/maps.hpp"
#include "uwbdar/rng.hpp"

#include <cmath>

using namespace uwbdar;

namespace {

PulseMatrix make_pulse(Index fast, Index slow, double frame_rate = 100.0) {
    PulseMatrix m;
    m.data = Matrix::Zero(fast, slow);
    m.frame_rate = frame_rate;
    return m;
}

PulseMatrix random_pulse(Index fast, Index slow, std::uint64_t seed) {
    PulseMatrix m = make_pulse(fast, slow);
    Rng rng(seed);
    for (Index i = 0; i < m.data.size(); ++i) m.data.data()[i] = rng.gaussian();
    return m;
}

} // namespace

TEST_CASE("dft matches the naive oracle on awkward lengths") {
    for (Index n : {7, 178, 500}) {
        Rng rng(17 + static_cast<std::uint64_t>(n));
        Vector x(n);
        for (Index i = 0; i < n; ++i) x(i) = rng.gaussian();
        const auto fast = dft_forward(x);
        const auto naive = oracles::naive_dft(x);
        const double rel = (fast - naive).norm() / naive.norm();
        CHECK(rel < 1e-5);
    }
}

TEST_CASE("dft satisfies Parseval on fast-time columns") {
    PulseMatrix m = random_pulse(178, 4, 99);
    for (Index s = 0; s < m.slow_bins(); ++s) {
        const Vector col = m.data.col(s);
        const double time_energy = col.squaredNorm();
        const double freq_energy = dft_forward(col).squaredNorm() / static_cast<double>(col.size());
        CHECK(std::abs(time_energy - freq_energy) / time_energy < 1e-6);
    }
}

TEST_CASE("range_map takes magnitudes and keeps shape") {
    PulseMatrix m = make_pulse(178, 500);
    m.data(5, 9) = -2.5;
    auto map = maps::range_map(m);
    CHECK(map.kind == maps::MapKind::RangeTime);
    CHECK(map.data.rows() == 178);
    CHECK(map.data.cols() == 500);
    CHECK(map.data(5, 9) == 2.5);
    CHECK(map.data.sum() == 2.5); // nonzero only at the impulse
    auto raw = maps::range_map(m, true);
    CHECK(raw.data(5, 9) == -2.5);

    auto zero = maps::range_map(make_pulse(16, 8));
    CHECK(zero.data.isZero(0.0));
}

TEST_CASE("frequency_map DC column and cosine peaks") {
    PulseMatrix m = make_pulse(178, 2);
    m.data.col(0).setConstant(3.0);
    for (Index f = 0; f < 178; ++f)
        m.data(f, 1) = std::cos(2.0 * M_PI * 7.0 * static_cast<double>(f) / 178.0);
    auto map = maps::frequency_map(m);
    CHECK(map.kind == maps::MapKind::FrequencyTime);
    CHECK(map.data.rows() == 178);
    CHECK(map.data(0, 0) == doctest::Approx(178.0 * 3.0).epsilon(1e-9));
    CHECK(map.data.col(0).tail(177).maxCoeff() < 1e-8);

    // cosine at 7 cycles concentrates in bins 7 and 171
    Index peak = 0;
    map.data.col(1).maxCoeff(&peak);
    CHECK((peak == 7 || peak == 171));
    CHECK(map.data(7, 1) == doctest::Approx(89.0).epsilon(1e-6));
    CHECK(map.data(171, 1) == doctest::Approx(89.0).epsilon(1e-6));

    // full-size contract on the default geometry
    auto full = maps::frequency_map(random_pulse(178, 500, 3));
    CHECK(full.data.rows() == 178);
    CHECK(full.data.cols() == 500);
}

TEST_CASE("frequency_map agrees with the naive DFT oracle") {
    PulseMatrix m = random_pulse(178, 3, 1234);
    auto map = maps::frequency_map(m);
    for (Index s = 0; s < 3; ++s) {
        const Vector expected = oracles::naive_dft(m.data.col(s)).cwiseAbs();
        const double rel = (map.data.col(s) - expected).norm() / expected.norm();
        CHECK(rel < 1e-5);
    }
}

TEST_CASE("range_doppler_map centers zero Doppler and finds modulation") {
    PulseMatrix still = make_pulse(16, 500);
    still.data.row(4).setConstant(1.0);
    auto rd = maps::range_doppler_map(still);
    CHECK(rd.kind == maps::MapKind::RangeDoppler);
    CHECK(rd.data.rows() == 16);
    CHECK(rd.data.cols() == 500);
    Index peak = 0;
    rd.data.row(4).maxCoeff(&peak);
    CHECK(peak == 250);

    PulseMatrix moving = make_pulse(16, 500);
    for (Index s = 0; s < 500; ++s)
        moving.data(4, s) = std::cos(2.0 * M_PI * 10.0 * static_cast<double>(s) / 100.0);
    auto rd2 = maps::range_doppler_map(moving);
    // 10 Hz at 100 Hz over 500 frames lands 50 bins off center
    CHECK(rd2.data(4, 200) == doctest::Approx(250.0).epsilon(1e-6));
    CHECK(rd2.data(4, 300) == doctest::Approx(250.0).epsilon(1e-6));
    Index peak2 = 0;
    rd2.data.row(4).maxCoeff(&peak2);
    CHECK((peak2 == 200 || peak2 == 300));
}

TEST_CASE("range_doppler rows agree with the naive oracle") {
    PulseMatrix m = random_pulse(4, 50, 7);
    auto rd = maps::range_doppler_map(m);
    for (Index f = 0; f < 4; ++f) {
        Vector expected = oracles::naive_dft(m.data.row(f).transpose()).cwiseAbs();
        Vector shifted(50);
        for (Index k = 0; k < 50; ++k) shifted((k + 25) % 50) = expected(k);
        const double rel = (rd.data.row(f).transpose() - shifted).norm() / shifted.norm();
        CHECK(rel < 1e-5);
    }
}

TEST_CASE("crop bounds, axes, and verbatim copies") {
    PulseMatrix m = random_pulse(178, 500, 42);
    auto map = maps::range_map(m);

    auto roi = maps::crop(map, {8, 59, 0, 500});
    CHECK(roi.data.rows() == 51);
    CHECK(roi.data.cols() == 500);
    CHECK(roi.row_axis.start == 8.0);

    auto identity = maps::crop(map, {0, 178, 0, 500});
    CHECK(identity.data == map.data);

    auto top = maps::crop(map, {0, 2, 0, 500});
    CHECK(top.data == Matrix(map.data.topRows(2)));

    CHECK_THROWS_AS(maps::crop(map, {0, 179, 0, 500}), std::invalid_argument);
    CHECK_THROWS_AS(maps::crop(map, {5, 5, 0, 500}), std::invalid_argument);
}

TEST_CASE("crop commutes with the range-time magnitude") {
    PulseMatrix m = random_pulse(32, 40, 5);
    auto map_then_crop = maps::crop(maps::range_map(m), {4, 20, 3, 30});
    PulseMatrix cropped = m;
    cropped.data = m.data.block(4, 3, 16, 27);
    auto crop_then_map = maps::range_map(cropped);
    CHECK((map_then_crop.data - crop_then_map.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("window_slices arithmetic and boundaries") {
    PulseMatrix m = random_pulse(16, 500, 11);
    auto slices = maps::window_slices(m, 1.0, 1.0);
    CHECK(slices.size() == 5);
    for (const auto& s : slices) CHECK(s.slow_bins() == 100);
    CHECK(slices[2].data == Matrix(m.data.middleCols(200, 100)));

    auto whole = maps::window_slices(m, 5.0, 5.0);
    CHECK(whole.size() == 1);
    CHECK(whole[0].slow_bins() == 500);

    CHECK(maps::window_slices(m, 10.0, 10.0).empty());

    // strided windows overlap
    auto strided = maps::window_slices(m, 2.0, 1.0);
    CHECK(strided.size() == 4);
}

TEST_CASE("maps are deterministic pure functions") {
    PulseMatrix m = random_pulse(32, 64, 2024);
    CHECK(maps::frequency_map(m).data == maps::frequency_map(m).data);
    CHECK(maps::range_doppler_map(m).data == maps::range_doppler_map(m).data);
}

TEST_CASE("band_rows splits frequency rows") {
    auto lower = maps::band_rows(maps::Band::Lower, 178, 500);
    CHECK(lower.row_start == 0);
    CHECK(lower.row_end == 89);
    auto higher = maps::band_rows(maps::Band::Higher, 178, 500);
    CHECK(higher.row_start == 89);
    CHECK(higher.row_end == 178);
    auto full = maps::band_rows(maps::Band::Full, 178, 500);
    CHECK(full.row_end == 178);
}

TEST_CASE("slow-time spectrogram alternative has the declared geometry") {
    PulseMatrix m = random_pulse(8, 500, 77);
    auto stft = maps::frequency_map_slow_time(m, 64, 16);
    CHECK(stft.kind == maps::MapKind::FrequencyTime);
    CHECK(stft.data.rows() == 64);
    CHECK(stft.data.cols() == (500 - 64) / 16 + 1);
}
