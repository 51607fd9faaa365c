#include "uwbdar/sim.hpp"

#include "uwbdar/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>

namespace uwbdar {

const char* to_string(Activity a) {
    switch (a) {
        case Activity::Relax: return "Relax";
        case Activity::Drive: return "Drive";
        case Activity::Nod: return "Nod";
        case Activity::Smoke: return "Smoke";
        case Activity::Drink: return "Drink";
        case Activity::Panel: return "Panel";
        case Activity::Phone: return "Phone";
    }
    return "?";
}

std::optional<Activity> activity_from_string(const std::string& name) {
    for (int i = 0; i < kNumActivities; ++i)
        if (name == to_string(static_cast<Activity>(i))) return static_cast<Activity>(i);
    return std::nullopt;
}

void validate(const PulseMatrix& m) {
    if (m.data.rows() < 1 || m.data.cols() < 1)
        throw std::invalid_argument("PulseMatrix: empty data");
    if (!m.data.allFinite())
        throw std::invalid_argument("PulseMatrix: non-finite entries");
}

namespace sim {

namespace {
constexpr double kTwoPi = 6.283185307179586;
}

PulseShape gaussian_pulse(Index n_bins) {
    if (n_bins < 1) throw std::invalid_argument("gaussian_pulse: need at least 1 bin");
    PulseShape p;
    p.samples.resize(n_bins);
    const double center = 0.5 * static_cast<double>(n_bins - 1);
    const double sigma = std::max(1.0, static_cast<double>(n_bins) / 5.0);
    for (Index i = 0; i < n_bins; ++i) {
        const double t = static_cast<double>(i) - center;
        p.samples(i) = std::exp(-0.5 * t * t / (sigma * sigma)) * std::cos(kTwoPi * t / 4.0);
    }
    const double peak = p.samples.cwiseAbs().maxCoeff();
    p.samples /= peak;
    return p;
}

PathSpec make_path(const PathMotion& m, double frame_rate) {
    if (frame_rate <= 0.0) throw std::invalid_argument("make_path: frame_rate must be positive");
    PathSpec path;
    path.attenuation = m.attenuation;
    path.phase_jitter_std = m.jitter_std;

    const double dt = 1.0 / frame_rate; // seconds per slow-time index
    auto base = [m, dt](double s) -> double {
        const double t = s * dt;
        switch (m.kind) {
            case PathMotion::Kind::Static: return m.center;
            case PathMotion::Kind::Sine:
                return m.center + m.amplitude * std::sin(kTwoPi * m.freq_hz * t + m.phase);
            case PathMotion::Kind::Sawtooth: {
                const double cycles = m.freq_hz * t;
                return m.center + m.amplitude * (cycles - std::floor(cycles));
            }
            case PathMotion::Kind::Transient: {
                double tt = t;
                if (m.period_s > 0.0) tt = t - m.period_s * std::floor(t / m.period_s);
                if (tt < m.approach_s && m.approach_s > 0.0)
                    return m.rest - m.extent * (tt / m.approach_s);
                tt -= m.approach_s;
                if (tt < m.dwell_s) return m.rest - m.extent;
                tt -= m.dwell_s;
                if (tt < m.retreat_s && m.retreat_s > 0.0)
                    return m.rest - m.extent * (1.0 - tt / m.retreat_s);
                return m.rest;
            }
        }
        return m.center;
    };
    if (m.mod_amp != 0.0) {
        path.delay_trajectory = [base, m, dt](double s) {
            return base(s) + m.mod_amp * std::sin(kTwoPi * m.mod_freq_hz * s * dt);
        };
    } else {
        path.delay_trajectory = base;
    }
    return path;
}

ActivityArchetype build_archetype(const ArchetypeSpec& spec, double frame_rate) {
    if (spec.motions.empty())
        throw std::invalid_argument("build_archetype: archetype needs at least one path");
    if (!(spec.noise_std >= 0.0))
        throw std::invalid_argument("build_archetype: noise_std must be finite and >= 0");
    ActivityArchetype a;
    a.label = spec.label;
    a.noise_std = spec.noise_std;
    for (const auto& m : spec.motions) a.paths.push_back(make_path(m, frame_rate));
    return a;
}

namespace {

// Deposit pulse(t - tau) with sub-bin linear interpolation; samples outside
// the template read as zero.
void deposit_pulse(Vector& frame, const Vector& pulse, double tau, double gain) {
    const Index len = pulse.size();
    const Index base = static_cast<Index>(std::floor(tau));
    const double frac = tau - static_cast<double>(base);
    for (Index i = 0; i <= len; ++i) {
        const Index bin = base + i;
        if (bin < 0 || bin >= frame.size()) continue;
        const double lo = (i < len) ? pulse(i) : 0.0;
        const double hi = (i >= 1) ? pulse(i - 1) : 0.0;
        frame(bin) += gain * ((1.0 - frac) * lo + frac * hi);
    }
}

} // namespace

Vector synthesize_frame(const ActivityArchetype& archetype, const SubjectProfile& subject,
                        const PulseShape& pulse, Index s, Index fast_bins) {
    if (fast_bins < pulse.samples.size())
        throw std::invalid_argument("synthesize_frame: fast_bins shorter than the pulse");
    if (archetype.paths.empty())
        throw std::invalid_argument("synthesize_frame: archetype has no paths");
    if (!(archetype.noise_std >= 0.0) || !std::isfinite(subject.amplitude_scale) ||
        !std::isfinite(subject.range_offset_bins) || !(subject.tempo_scale > 0.0))
        throw std::invalid_argument("synthesize_frame: non-finite parameter");

    Rng rng(mix_seed(subject.rng_seed, static_cast<std::uint64_t>(s)));
    Vector frame = Vector::Zero(fast_bins);
    const double t = static_cast<double>(s) * subject.tempo_scale + subject.slow_time_offset;
    for (std::size_t f = 0; f < archetype.paths.size(); ++f) {
        const PathSpec& path = archetype.paths[f];
        if (!(path.attenuation >= 0.0) || !(path.phase_jitter_std >= 0.0))
            throw std::invalid_argument("synthesize_frame: bad path parameters");
        const double jitter = rng.gaussian(0.0, path.phase_jitter_std);
        const double tau = path.delay_trajectory(t) + subject.range_offset_bins + jitter;
        if (!std::isfinite(tau) || tau < 0.0 || tau >= static_cast<double>(fast_bins))
            throw std::invalid_argument("synthesize_frame: path " + std::to_string(f) +
                                        " delay " + std::to_string(tau) +
                                        " outside [0, " + std::to_string(fast_bins) +
                                        ") at s=" + std::to_string(s));
        deposit_pulse(frame, pulse.samples, tau, path.attenuation * subject.amplitude_scale);
    }
    if (archetype.noise_std > 0.0)
        for (Index j = 0; j < fast_bins; ++j) frame(j) += rng.gaussian(0.0, archetype.noise_std);
    return frame;
}

std::vector<PulseMatrix> generate_dataset(const std::vector<ActivityArchetype>& archetypes,
                                          const std::vector<SubjectProfile>& subjects,
                                          int samples_per_pair, const DatasetGeometry& geometry,
                                          const std::vector<PairExclusion>& exclusions,
                                          const PulseShape& pulse) {
    if (subjects.empty()) throw std::invalid_argument("generate_dataset: empty subject list");
    if (samples_per_pair < 1)
        throw std::invalid_argument("generate_dataset: samples_per_pair must be >= 1");
    std::set<int> ids;
    for (const auto& s : subjects)
        if (!ids.insert(s.subject_id).second)
            throw std::invalid_argument("generate_dataset: duplicate subject_id " +
                                        std::to_string(s.subject_id));

    auto excluded = [&exclusions](int subject_id, Activity label) {
        for (const auto& e : exclusions)
            if (e.subject_id == subject_id && e.label == label) return true;
        return false;
    };

    std::vector<PulseMatrix> out;
    for (const auto& subject : subjects) {
        for (const auto& archetype : archetypes) {
            if (excluded(subject.subject_id, archetype.label)) continue;
            for (int rep = 0; rep < samples_per_pair; ++rep) {
                SubjectProfile eff = subject;
                eff.rng_seed = mix_seed(subject.rng_seed,
                                        static_cast<std::uint64_t>(archetype.label),
                                        static_cast<std::uint64_t>(rep));
                eff.slow_time_offset =
                    Rng(mix_seed(eff.rng_seed, 0x77110ULL)).uniform(0.0, 1000.0);
                PulseMatrix m;
                m.frame_rate = geometry.frame_rate;
                m.label = archetype.label;
                m.subject_id = subject.subject_id;
                m.data.resize(geometry.fast_bins, geometry.slow_bins);
                for (Index s = 0; s < geometry.slow_bins; ++s)
                    m.data.col(s) = synthesize_frame(archetype, eff, pulse, s, geometry.fast_bins);
                // Samples are stored as 32-bit floats on disk; quantize here so
                // in-memory data and containers agree bit-for-bit.
                m.data = m.data.cast<float>().cast<double>();
                out.push_back(std::move(m));
            }
        }
    }
    return out;
}

std::vector<PulseMatrix> generate_dataset(const SimConfig& cfg) {
    std::vector<ActivityArchetype> archetypes;
    for (const auto& spec : cfg.archetypes)
        archetypes.push_back(build_archetype(spec, cfg.geometry.frame_rate));
    return generate_dataset(archetypes, cfg.subjects, cfg.samples_per_pair, cfg.geometry,
                            cfg.exclusions, gaussian_pulse(cfg.pulse_bins));
}

std::vector<ArchetypeSpec> default_archetypes() {
    using K = PathMotion::Kind;
    std::vector<ArchetypeSpec> specs;

    auto torso = [](double jitter = 0.03) {
        PathMotion p;
        p.kind = K::Static;
        p.center = 20.0;
        p.attenuation = 1.0;
        p.jitter_std = jitter;
        return p;
    };
    auto breathing = [] {
        PathMotion p;
        p.kind = K::Sine;
        p.center = 21.8;
        p.amplitude = 0.9;
        p.freq_hz = 0.28;
        p.attenuation = 0.5;
        p.jitter_std = 0.02;
        return p;
    };
    auto tremor = [](double center, double freq_hz, double amplitude = 0.6) {
        PathMotion p;
        p.kind = K::Sine;
        p.center = center;
        p.amplitude = amplitude;
        p.freq_hz = freq_hz;
        p.attenuation = amplitude > 1.0 ? 0.75 : 0.6;
        p.jitter_std = 0.02;
        return p;
    };

    // Every activity couples road vibration into the echo at its own rate.
    // The Smoke/Drink pair is separated almost purely by that rate: 47.5 Hz
    // and 42.06 Hz sit symmetrically around the fold frequency of a 250-to-224
    // column resample (223/249*100/2 Hz), so plain down-sampling of a 2.5 s
    // window maps one onto the other while a full-resolution path keeps them
    // apart.
    {
        ArchetypeSpec a;
        a.label = Activity::Relax;
        a.noise_std = 0.05;
        a.motions = {torso(0.06), breathing(), tremor(24.5, 8.0)};
        specs.push_back(a);
    }
    {
        ArchetypeSpec a;
        a.label = Activity::Drive;
        a.noise_std = 0.05;
        PathMotion hand1;
        hand1.kind = K::Sine;
        hand1.center = 12.5;
        hand1.amplitude = 1.3;
        hand1.freq_hz = 0.9;
        hand1.attenuation = 0.6;
        hand1.jitter_std = 0.03;
        PathMotion hand2 = hand1;
        hand2.center = 15.5;
        hand2.amplitude = 1.1;
        hand2.freq_hz = 1.25;
        hand2.phase = 1.3;
        hand2.attenuation = 0.5;
        a.motions = {torso(), breathing(), hand1, hand2, tremor(24.5, 12.0)};
        specs.push_back(a);
    }
    {
        ArchetypeSpec a;
        a.label = Activity::Nod;
        a.noise_std = 0.05;
        PathMotion head;
        head.kind = K::Sawtooth;
        head.center = 26.0;
        head.amplitude = 4.5;
        head.freq_hz = 0.5;
        head.attenuation = 0.75;
        head.jitter_std = 0.04;
        a.motions = {torso(), breathing(), head, tremor(33.0, 16.0)};
        specs.push_back(a);
    }
    auto reach = [](double rest, double extent, double approach, double dwell, double retreat,
                    double period) {
        PathMotion p;
        p.kind = K::Transient;
        p.rest = rest;
        p.extent = extent;
        p.approach_s = approach;
        p.dwell_s = dwell;
        p.retreat_s = retreat;
        p.period_s = period;
        p.attenuation = 0.55;
        p.jitter_std = 0.04;
        return p;
    };
    {
        ArchetypeSpec a;
        a.label = Activity::Smoke;
        a.noise_std = 0.05;
        a.motions = {torso(), breathing(), reach(36.0, 13.0, 0.8, 1.5, 0.8, 4.4),
                     tremor(40.5, 47.5, 1.1), tremor(44.0, 47.5, 1.1)};
        specs.push_back(a);
    }
    {
        ArchetypeSpec a;
        a.label = Activity::Drink;
        a.noise_std = 0.05;
        a.motions = {torso(), breathing(), reach(36.0, 13.0, 0.8, 1.35, 0.8, 4.6),
                     tremor(40.5, 42.06, 1.1), tremor(44.0, 42.06, 1.1)};
        specs.push_back(a);
    }
    {
        ArchetypeSpec a;
        a.label = Activity::Panel;
        a.noise_std = 0.05;
        a.motions = {torso(), breathing(), reach(29.0, 7.0, 0.45, 0.5, 0.45, 2.6),
                     tremor(27.0, 18.0)};
        specs.push_back(a);
    }
    {
        ArchetypeSpec a;
        a.label = Activity::Phone;
        a.noise_std = 0.05;
        a.motions = {torso(), breathing(), reach(33.0, 10.0, 0.6, 1.0, 0.6, 3.4),
                     tremor(30.0, 28.0)};
        specs.push_back(a);
    }
    return specs;
}

std::vector<SubjectProfile> default_subjects(int count, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("default_subjects: count must be >= 1");
    std::vector<SubjectProfile> subjects;
    for (int i = 0; i < count; ++i) {
        Rng rng(mix_seed(seed, 0x50bbULL, static_cast<std::uint64_t>(i)));
        SubjectProfile s;
        s.subject_id = i + 1;
        s.range_offset_bins = rng.uniform(-2.5, 2.5);
        s.amplitude_scale = rng.uniform(0.85, 1.2);
        s.tempo_scale = rng.uniform(0.975, 1.025);
        s.rng_seed = mix_seed(seed, 0xdeed, static_cast<std::uint64_t>(i));
        subjects.push_back(s);
    }
    return subjects;
}

SimConfig default_sim_config(int subjects, int samples_per_pair, std::uint64_t seed) {
    SimConfig cfg;
    cfg.archetypes = default_archetypes();
    cfg.subjects = default_subjects(subjects, seed);
    cfg.samples_per_pair = samples_per_pair;
    return cfg;
}

// --- config (de)serialization -------------------------------------------

namespace {

using nlohmann::json;

json motion_to_json(const PathMotion& m) {
    static const char* kinds[] = {"static", "sine", "sawtooth", "transient"};
    json j;
    j["kind"] = kinds[static_cast<int>(m.kind)];
    j["attenuation"] = m.attenuation;
    j["jitter_std"] = m.jitter_std;
    switch (m.kind) {
        case PathMotion::Kind::Static: j["center"] = m.center; break;
        case PathMotion::Kind::Sine:
        case PathMotion::Kind::Sawtooth:
            j["center"] = m.center;
            j["amplitude"] = m.amplitude;
            j["freq_hz"] = m.freq_hz;
            if (m.phase != 0.0) j["phase"] = m.phase;
            break;
        case PathMotion::Kind::Transient:
            j["rest"] = m.rest;
            j["extent"] = m.extent;
            j["approach_s"] = m.approach_s;
            j["dwell_s"] = m.dwell_s;
            j["retreat_s"] = m.retreat_s;
            j["period_s"] = m.period_s;
            break;
    }
    if (m.mod_amp != 0.0) {
        j["mod_amp"] = m.mod_amp;
        j["mod_freq_hz"] = m.mod_freq_hz;
    }
    return j;
}

PathMotion motion_from_json(const json& j) {
    PathMotion m;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "static") m.kind = PathMotion::Kind::Static;
    else if (kind == "sine") m.kind = PathMotion::Kind::Sine;
    else if (kind == "sawtooth") m.kind = PathMotion::Kind::Sawtooth;
    else if (kind == "transient") m.kind = PathMotion::Kind::Transient;
    else throw std::invalid_argument("sim config: unknown path kind '" + kind + "'");
    m.attenuation = j.value("attenuation", 1.0);
    m.jitter_std = j.value("jitter_std", 0.0);
    m.center = j.value("center", m.center);
    m.amplitude = j.value("amplitude", m.amplitude);
    m.freq_hz = j.value("freq_hz", m.freq_hz);
    m.phase = j.value("phase", 0.0);
    m.rest = j.value("rest", m.rest);
    m.extent = j.value("extent", m.extent);
    m.approach_s = j.value("approach_s", m.approach_s);
    m.dwell_s = j.value("dwell_s", m.dwell_s);
    m.retreat_s = j.value("retreat_s", m.retreat_s);
    m.period_s = j.value("period_s", m.period_s);
    m.mod_amp = j.value("mod_amp", 0.0);
    m.mod_freq_hz = j.value("mod_freq_hz", 0.0);
    return m;
}

} // namespace

void save_sim_config(const SimConfig& cfg, const std::string& path) {
    json j;
    j["geometry"] = {{"fast_bins", cfg.geometry.fast_bins},
                     {"slow_bins", cfg.geometry.slow_bins},
                     {"frame_rate", cfg.geometry.frame_rate}};
    j["samples_per_pair"] = cfg.samples_per_pair;
    j["pulse_bins"] = cfg.pulse_bins;
    for (const auto& a : cfg.archetypes) {
        json ja;
        ja["label"] = to_string(a.label);
        ja["noise_std"] = a.noise_std;
        for (const auto& m : a.motions) ja["paths"].push_back(motion_to_json(m));
        j["archetypes"].push_back(ja);
    }
    for (const auto& s : cfg.subjects) {
        j["subjects"].push_back({{"id", s.subject_id},
                                 {"range_offset_bins", s.range_offset_bins},
                                 {"amplitude_scale", s.amplitude_scale},
                                 {"tempo_scale", s.tempo_scale},
                                 {"seed", s.rng_seed}});
    }
    for (const auto& e : cfg.exclusions)
        j["exclusions"].push_back({{"subject", e.subject_id}, {"label", to_string(e.label)}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_sim_config: cannot write " + path);
    out << j.dump(2) << '\n';
}

SimConfig load_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_sim_config: cannot read " + path);
    json j;
    in >> j;
    SimConfig cfg;
    if (j.contains("geometry")) {
        const auto& g = j["geometry"];
        cfg.geometry.fast_bins = g.value("fast_bins", cfg.geometry.fast_bins);
        cfg.geometry.slow_bins = g.value("slow_bins", cfg.geometry.slow_bins);
        cfg.geometry.frame_rate = g.value("frame_rate", cfg.geometry.frame_rate);
    }
    cfg.samples_per_pair = j.value("samples_per_pair", cfg.samples_per_pair);
    cfg.pulse_bins = j.value("pulse_bins", cfg.pulse_bins);
    if (!j.contains("archetypes")) {
        cfg.archetypes = default_archetypes();
    } else {
        for (const auto& ja : j["archetypes"]) {
            ArchetypeSpec a;
            const auto label = activity_from_string(ja.at("label").get<std::string>());
            if (!label)
                throw std::invalid_argument("sim config: unknown label " +
                                            ja.at("label").get<std::string>());
            a.label = *label;
            a.noise_std = ja.value("noise_std", 0.0);
            for (const auto& jm : ja.at("paths")) a.motions.push_back(motion_from_json(jm));
            cfg.archetypes.push_back(a);
        }
    }
    if (!j.contains("subjects"))
        throw std::invalid_argument("sim config: missing subjects");
    for (const auto& js : j["subjects"]) {
        SubjectProfile s;
        s.subject_id = js.at("id").get<int>();
        s.range_offset_bins = js.value("range_offset_bins", 0.0);
        s.amplitude_scale = js.value("amplitude_scale", 1.0);
        s.tempo_scale = js.value("tempo_scale", 1.0);
        s.rng_seed = js.value("seed", 0ULL);
        cfg.subjects.push_back(s);
    }
    if (j.contains("exclusions")) {
        for (const auto& je : j["exclusions"]) {
            PairExclusion e;
            e.subject_id = je.at("subject").get<int>();
            const auto label = activity_from_string(je.at("label").get<std::string>());
            if (!label) throw std::invalid_argument("sim config: unknown exclusion label");
            e.label = *label;
            cfg.exclusions.push_back(e);
        }
    }
    return cfg;
}

} // namespace sim
} // namespace uwbdar
