#pragma once

#include "uwbdar/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace uwbdar::sim {

/// Transmitted pulse template, peak magnitude normalized to 1.
struct PulseShape {
    Vector samples;
    double sample_rate = 23.328e9;
};

/// Gaussian-modulated sinusoid sampled to `n_bins` fast-time bins.
PulseShape gaussian_pulse(Index n_bins = 16);

/// One multipath component: constant attenuation, a delay trajectory over
/// slow-time (in fast-time bins), and Gaussian jitter on that delay.
struct PathSpec {
    double attenuation = 1.0;
    std::function<double(double)> delay_trajectory; // slow-time index -> delay bins
    double phase_jitter_std = 0.0;
};

/// Parametric motion primitives used to build PathSpec trajectories from
/// configuration. `mod_amp`/`mod_freq_hz` add a small sinusoidal wobble on
/// top of the base motion (vibration coupling differs per activity).
struct PathMotion {
    enum class Kind { Static, Sine, Sawtooth, Transient };
    Kind kind = Kind::Static;
    double attenuation = 1.0;
    double jitter_std = 0.0;
    double center = 20.0;    // Static/Sine/Sawtooth: base delay (bins)
    double amplitude = 0.0;  // Sine/Sawtooth: swing (bins)
    double freq_hz = 0.0;    // Sine/Sawtooth rate
    double phase = 0.0;      // Sine phase (radians)
    double rest = 30.0;      // Transient: resting delay
    double extent = 10.0;    // Transient: travel toward the radar (bins)
    double approach_s = 0.7; // Transient timing
    double dwell_s = 1.0;
    double retreat_s = 0.7;
    double period_s = 4.0;   // Transient repeat period (0 = single event at t=0)

    double mod_amp = 0.0;
    double mod_freq_hz = 0.0;
};

PathSpec make_path(const PathMotion& motion, double frame_rate);

struct ActivityArchetype {
    Activity label = Activity::Relax;
    std::vector<PathSpec> paths;
    double noise_std = 0.0;
};

/// Parametric form of an archetype, serializable to/from config files.
struct ArchetypeSpec {
    Activity label = Activity::Relax;
    std::vector<PathMotion> motions;
    double noise_std = 0.0;
};

ActivityArchetype build_archetype(const ArchetypeSpec& spec, double frame_rate);

/// Per-volunteer variation: constant range shift, echo gain, motion tempo,
/// plus the seed that drives every random draw for this subject.
struct SubjectProfile {
    int subject_id = 0;
    double range_offset_bins = 0.0;
    double amplitude_scale = 1.0;
    double tempo_scale = 1.0;
    std::uint64_t rng_seed = 0;
    // Slow-time phase of the observation window within the ongoing activity;
    // randomized per sample so a recording can start mid-motion.
    double slow_time_offset = 0.0;
};

/// One received fast-time frame at slow-time index s (Gaussian noise added).
/// Deterministic given subject.rng_seed and s.
Vector synthesize_frame(const ActivityArchetype& archetype, const SubjectProfile& subject,
                        const PulseShape& pulse, Index s, Index fast_bins);

struct DatasetGeometry {
    Index fast_bins = 178;
    Index slow_bins = 500; // 5 s at 100 Hz
    double frame_rate = 100.0;
};

struct PairExclusion {
    int subject_id = 0;
    Activity label = Activity::Relax;
};

struct SimConfig {
    std::vector<ArchetypeSpec> archetypes; // one per activity
    std::vector<SubjectProfile> subjects;
    DatasetGeometry geometry;
    int samples_per_pair = 4;
    std::vector<PairExclusion> exclusions;
    Index pulse_bins = 16;
};

/// The built-in archetype library. Stand-ins with the qualitative per-activity
/// structure (static torso, periodic hands, sawtooth nod, transient reaches),
/// not calibrated motion models.
std::vector<ArchetypeSpec> default_archetypes();

std::vector<SubjectProfile> default_subjects(int count, std::uint64_t seed);

SimConfig default_sim_config(int subjects = 6, int samples_per_pair = 4, std::uint64_t seed = 1);

std::vector<PulseMatrix> generate_dataset(const SimConfig& cfg);

/// Lower-level entry used by generate_dataset; archetypes must cover every
/// requested label.
std::vector<PulseMatrix> generate_dataset(const std::vector<ActivityArchetype>& archetypes,
                                          const std::vector<SubjectProfile>& subjects,
                                          int samples_per_pair, const DatasetGeometry& geometry,
                                          const std::vector<PairExclusion>& exclusions,
                                          const PulseShape& pulse);

/// Plain-text (JSON) config round-trip; the key set is documented in the
/// README under "simulation config".
SimConfig load_sim_config(const std::string& path);
void save_sim_config(const SimConfig& cfg, const std::string& path);

} // namespace uwbdar::sim
