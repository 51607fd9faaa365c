#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace uwbdar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Eigen::Index;

/// The seven in-cabin activities. Drive is the only non-distracted one.
enum class Activity : int {
    Relax = 0,
    Drive = 1,
    Nod = 2,
    Smoke = 3,
    Drink = 4,
    Panel = 5,
    Phone = 6,
};

inline constexpr int kNumActivities = 7;

const char* to_string(Activity a);
std::optional<Activity> activity_from_string(const std::string& name);

/// Raw 2-D echo record: fast-time (range bins) x slow-time (pulse index).
struct PulseMatrix {
    Matrix data;               // fast_bins x slow_bins
    double frame_rate = 100.0; // pulses per second along slow-time
    Activity label = Activity::Relax;
    int subject_id = 0;

    Index fast_bins() const { return data.rows(); }
    Index slow_bins() const { return data.cols(); }
};

void validate(const PulseMatrix& m);

} // namespace uwbdar
