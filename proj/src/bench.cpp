#include "uwbdar/bench.hpp"

#include "uwbdar/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace uwbdar::bench {

using nlohmann::json;

SplitPlan make_loso_splits(const std::vector<SampleMeta>& metadata) {
    std::set<int> subjects;
    std::set<int> ids;
    for (const auto& m : metadata) {
        subjects.insert(m.subject_id);
        if (!ids.insert(m.sample_id).second)
            throw std::invalid_argument("make_loso_splits: duplicate sample id " +
                                        std::to_string(m.sample_id));
    }
    if (subjects.size() < 2)
        throw std::invalid_argument("make_loso_splits: need at least 2 subjects, got " +
                                    std::to_string(subjects.size()));
    SplitPlan plan;
    for (int held_out : subjects) {
        Fold fold;
        fold.held_out_subject = held_out;
        for (const auto& m : metadata)
            (m.subject_id == held_out ? fold.test_ids : fold.train_ids).push_back(m.sample_id);
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

EvalReport score(const std::vector<int>& predictions, const std::vector<int>& labels,
                 int num_classes, int non_distracted_class) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("score: prediction/label length mismatch");
    if (predictions.empty()) throw std::invalid_argument("score: empty inputs");

    EvalReport r;
    r.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
    long correct = 0, binary_correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes || predictions[i] < 0 ||
            predictions[i] >= num_classes)
            throw std::invalid_argument("score: class index out of range");
        r.confusion(labels[i], predictions[i]) += 1;
        if (labels[i] == predictions[i]) ++correct;
        if ((labels[i] == non_distracted_class) == (predictions[i] == non_distracted_class))
            ++binary_correct;
    }
    const double total = static_cast<double>(labels.size());
    r.accuracy = static_cast<double>(correct) / total;
    r.binary_distracted_accuracy = static_cast<double>(binary_correct) / total;

    r.precision = Vector::Zero(num_classes);
    r.recall = Vector::Zero(num_classes);
    r.f1 = Vector::Zero(num_classes);
    for (int c = 0; c < num_classes; ++c) {
        const double tp = r.confusion(c, c);
        const double col = r.confusion.col(c).sum();
        const double row = r.confusion.row(c).sum();
        if (col > 0) {
            r.precision(c) = tp / col;
        } else {
            r.precision(c) = 0.0;
            r.zero_prediction_classes.push_back(c);
        }
        r.recall(c) = row > 0 ? tp / row : 0.0;
        const double pr = r.precision(c) + r.recall(c);
        r.f1(c) = pr > 0 ? 2.0 * r.precision(c) * r.recall(c) / pr : 0.0;
    }
    return r;
}

std::string report_to_json(const EvalReport& r) {
    json j;
    j["type"] = "report";
    j["fingerprint"] = r.config_fingerprint;
    j["seed"] = r.seed;
    j["accuracy"] = r.accuracy;
    j["binary_distracted_accuracy"] = r.binary_distracted_accuracy;
    j["binary_mapping"] = r.binary_mapping;
    j["precision"] = std::vector<double>(r.precision.begin(), r.precision.end());
    j["recall"] = std::vector<double>(r.recall.begin(), r.recall.end());
    j["f1"] = std::vector<double>(r.f1.begin(), r.f1.end());
    std::vector<std::vector<int>> conf(r.confusion.rows());
    for (Index i = 0; i < r.confusion.rows(); ++i)
        conf[i] = std::vector<int>(r.confusion.row(i).begin(), r.confusion.row(i).end());
    j["confusion"] = conf;
    if (!r.zero_prediction_classes.empty())
        j["zero_prediction_classes"] = r.zero_prediction_classes;
    return j.dump();
}

// --- preparation ---------------------------------------------------------------

PreparedDataset prepare_dataset(const std::vector<PulseMatrix>& raw, const PrepConfig& prep,
                                model::DomainMode domain, model::BaselineFusion baseline) {
    const bool baseline_mode = baseline != model::BaselineFusion::None;
    const bool need_range = baseline_mode || domain != model::DomainMode::Freq;
    const bool need_freq =
        baseline_mode || domain == model::DomainMode::Freq || domain == model::DomainMode::Fusion;
    const bool doppler = !baseline_mode && domain == model::DomainMode::RangeDoppler;

    PreparedDataset out;
    int next_id = 0;
    for (const auto& rec : raw) {
        for (const auto& slice : maps::window_slices(rec, prep.window_s, prep.stride_s)) {
            model::Sample s;
            s.label = static_cast<int>(slice.label);
            s.subject_id = slice.subject_id;
            s.sample_id = next_id++;
            if (need_range) {
                maps::DomainMap m = doppler ? maps::range_doppler_map(slice, prep.log_magnitude)
                                            : maps::range_map(slice);
                if (prep.crop_roi) {
                    maps::CropSpec roi{prep.roi_row_start, prep.roi_row_end, 0, m.data.cols()};
                    m = maps::crop(m, roi);
                }
                s.range = std::move(m.data);
            }
            if (need_freq) {
                maps::DomainMap f = maps::frequency_map(slice, prep.log_magnitude);
                maps::CropSpec band = maps::band_rows(prep.band, f.data.rows(), f.data.cols());
                f = maps::crop(f, band);
                s.freq = std::move(f.data);
            }
            out.metadata.push_back({s.sample_id, s.subject_id, slice.label});
            out.samples.push_back(std::move(s));
        }
    }
    if (!out.samples.empty()) {
        out.range_rows = out.samples[0].range.rows();
        out.range_cols = out.samples[0].range.cols();
        out.freq_rows = out.samples[0].freq.rows();
        out.freq_cols = out.samples[0].freq.cols();
    }
    return out;
}

// --- fold execution --------------------------------------------------------------

namespace {

std::vector<int> pick_shots(const PreparedDataset& ds, const std::vector<int>& test_ids,
                            int shots, std::uint64_t seed) {
    if (shots <= 0) return {};
    // Balanced round-robin over classes, deterministic under the run seed.
    std::map<int, std::vector<int>> by_label;
    for (int id : test_ids) by_label[ds.samples[id].label].push_back(id);
    Rng rng(mix_seed(seed, 0x5105ULL));
    for (auto& [label, ids] : by_label) {
        std::sort(ids.begin(), ids.end());
        for (int i = static_cast<int>(ids.size()) - 1; i > 0; --i)
            std::swap(ids[i], ids[static_cast<int>(rng.below(i + 1))]);
    }
    std::vector<int> picked;
    std::size_t round = 0;
    while (static_cast<int>(picked.size()) < shots) {
        bool any = false;
        for (auto& [label, ids] : by_label) {
            if (round < ids.size()) {
                picked.push_back(ids[round]);
                any = true;
                if (static_cast<int>(picked.size()) == shots) break;
            }
        }
        if (!any) break; // fewer candidates than requested shots
        ++round;
    }
    return picked;
}

void check_hygiene(const PreparedDataset& ds, const Fold& fold, const std::vector<int>& shot_ids,
                   const std::vector<int>& test_ids) {
    std::set<int> train(fold.train_ids.begin(), fold.train_ids.end());
    for (int id : test_ids)
        if (train.count(id)) throw std::logic_error("split hygiene: sample in train and test");
    std::set<int> shots(shot_ids.begin(), shot_ids.end());
    for (int id : test_ids)
        if (shots.count(id)) throw std::logic_error("split hygiene: few-shot sample in test");
    for (int id : fold.train_ids)
        if (ds.samples[id].subject_id == fold.held_out_subject)
            throw std::logic_error("split hygiene: held-out subject in training set");
}

} // namespace

RunOutcome run_fold(const PreparedDataset& ds, const Fold& fold,
                    const model::PretrainedBundle& bundle, const ExperimentConfig& cfg,
                    std::uint64_t run_seed, const std::string& fingerprint) {
    std::vector<int> shot_ids = pick_shots(ds, fold.test_ids, cfg.shots, run_seed);
    std::set<int> shot_set(shot_ids.begin(), shot_ids.end());
    std::vector<int> test_ids;
    for (int id : fold.test_ids)
        if (!shot_set.count(id)) test_ids.push_back(id);
    if (test_ids.empty()) throw std::invalid_argument("run_fold: no test samples left");
    check_hygiene(ds, fold, shot_ids, test_ids);

    model::ModelSpec mspec = cfg.mspec;
    mspec.seed = run_seed;
    model::TrainConfig tcfg = cfg.tcfg;
    tcfg.seed = run_seed;

    model::ActivityModel net(mspec, bundle, ds.range_rows, ds.range_cols, ds.freq_rows,
                             ds.freq_cols);

    std::vector<model::Sample> train_set;
    train_set.reserve(fold.train_ids.size());
    for (int id : fold.train_ids) train_set.push_back(ds.samples[id]);

    RunOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    out.loss_trace = model::train(net, train_set, tcfg).loss_trace;
    if (!shot_ids.empty()) {
        std::vector<model::Sample> shots;
        for (int id : shot_ids) shots.push_back(ds.samples[id]);
        net = model::few_shot_adapt(net, shots, tcfg);
    }
    out.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<int> predictions, labels;
    for (int id : test_ids) {
        predictions.push_back(net.predict(ds.samples[id]));
        labels.push_back(ds.samples[id].label);
    }
    out.report = score(predictions, labels, mspec.num_classes);
    out.report.config_fingerprint = fingerprint;
    out.report.seed = run_seed;
    return out;
}

AggregateResult run_experiment(const PreparedDataset& ds, const model::PretrainedBundle& bundle,
                               const ExperimentConfig& cfg, const std::string& fingerprint) {
    SplitPlan plan = make_loso_splits(ds.metadata);
    int folds = static_cast<int>(plan.folds.size());
    if (cfg.max_folds > 0) folds = std::min(folds, cfg.max_folds);

    struct Job {
        int fold;
        int repeat;
    };
    std::vector<Job> jobs;
    for (int f = 0; f < folds; ++f)
        for (int r = 0; r < cfg.repeats; ++r) jobs.push_back({f, r});

    std::vector<EvalReport> reports(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::string first_error;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                const std::uint64_t run_seed =
                    mix_seed(cfg.base_seed, static_cast<std::uint64_t>(jobs[i].fold),
                             static_cast<std::uint64_t>(jobs[i].repeat));
                reports[i] =
                    run_fold(ds, plan.folds[jobs[i].fold], bundle, cfg, run_seed, fingerprint)
                        .report;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (first_error.empty()) first_error = e.what();
            }
        }
    };
    const int threads = std::max(1, cfg.threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (!first_error.empty()) throw std::runtime_error("run_experiment: " + first_error);

    AggregateResult agg;
    agg.fingerprint = fingerprint;
    agg.reports = std::move(reports);
    double sum = 0.0, sum2 = 0.0, bsum = 0.0;
    for (const auto& r : agg.reports) {
        sum += r.accuracy;
        sum2 += r.accuracy * r.accuracy;
        bsum += r.binary_distracted_accuracy;
    }
    const double n = static_cast<double>(agg.reports.size());
    agg.mean_accuracy = sum / n;
    agg.mean_binary_accuracy = bsum / n;
    agg.std_accuracy = std::sqrt(std::max(0.0, sum2 / n - agg.mean_accuracy * agg.mean_accuracy));
    return agg;
}

// --- ablation ------------------------------------------------------------------------

namespace {

std::string make_fingerprint(const ExperimentConfig& cfg) {
    std::string fp;
    fp += "domain=" + std::string(to_string(cfg.mspec.domain));
    fp += ";strategy=" + std::string(to_string(cfg.mspec.strategy));
    fp += ";baseline=" + std::string(to_string(cfg.mspec.baseline));
    fp += ";window=" + std::to_string(cfg.prep.window_s);
    fp += ";crop=" + std::string(cfg.prep.crop_roi ? "roi" : "full");
    fp += ";band=" + std::string(maps::to_string(cfg.prep.band));
    fp += ";shots=" + std::to_string(cfg.shots);
    fp += ";epochs=" + std::to_string(cfg.tcfg.epochs);
    fp += ";lr=" + std::to_string(cfg.tcfg.lr);
    fp += ";seed=" + std::to_string(cfg.base_seed);
    return fp;
}

template <typename T>
std::vector<T> axis_or(const std::vector<T>& axis, T fallback) {
    if (axis.empty()) return {fallback};
    return axis;
}

} // namespace

std::vector<AggregateResult> run_ablation(const GridSpec& grid,
                                          const std::vector<PulseMatrix>& raw,
                                          const model::PretrainedBundle& bundle,
                                          const ExperimentConfig& base,
                                          const std::string& report_path) {
    std::ofstream report_file;
    if (!report_path.empty()) {
        report_file.open(report_path, std::ios::app);
        if (!report_file) throw std::runtime_error("run_ablation: cannot write " + report_path);
    }

    const auto windows = axis_or(grid.windows_s, base.prep.window_s);
    const auto crops = axis_or(grid.crops, base.prep.crop_roi);
    const auto bands = axis_or(grid.bands, base.prep.band);
    const auto shots_axis = axis_or(grid.shots, base.shots);
    const auto domains = axis_or(grid.domains, base.mspec.domain);
    const auto strategies = axis_or(grid.strategies, base.mspec.strategy);
    const auto fusions = axis_or(grid.fusions, base.mspec.baseline);

    std::vector<AggregateResult> results;
    std::map<double, double> window_trend;

    for (double window : windows)
        for (bool crop : crops)
            for (maps::Band band : bands)
                for (int shot : shots_axis)
                    for (auto domain : domains)
                        for (auto strategy : strategies)
                            for (auto fusion : fusions) {
                                ExperimentConfig cfg = base;
                                cfg.prep.window_s = window;
                                cfg.prep.stride_s = window;
                                cfg.prep.crop_roi = crop;
                                cfg.prep.band = band;
                                cfg.shots = shot;
                                cfg.mspec.domain = domain;
                                cfg.mspec.strategy = strategy;
                                cfg.mspec.baseline = fusion;
                                cfg.repeats = grid.repeats;

                                const bool has_freq_branch =
                                    fusion != model::BaselineFusion::None ||
                                    domain == model::DomainMode::Freq ||
                                    domain == model::DomainMode::Fusion;
                                if (!grid.bands.empty() && !has_freq_branch) {
                                    std::cerr << "ablation: skipping band sweep cell for "
                                              << to_string(domain)
                                              << " (no frequency branch)\n";
                                    continue;
                                }
                                if (!grid.strategies.empty() &&
                                    fusion != model::BaselineFusion::None) {
                                    std::cerr << "ablation: skipping strategy sweep cell for "
                                              << to_string(fusion) << " baseline\n";
                                    continue;
                                }

                                PreparedDataset ds =
                                    prepare_dataset(raw, cfg.prep, domain, fusion);
                                if (ds.samples.empty()) {
                                    std::cerr << "ablation: skipping window=" << window
                                              << " (no slices fit the recording)\n";
                                    continue;
                                }
                                const std::string fp = make_fingerprint(cfg);
                                AggregateResult agg = run_experiment(ds, bundle, cfg, fp);
                                if (report_file) {
                                    for (const auto& r : agg.reports)
                                        report_file << report_to_json(r) << '\n';
                                    json ja;
                                    ja["type"] = "aggregate";
                                    ja["fingerprint"] = fp;
                                    ja["mean_accuracy"] = agg.mean_accuracy;
                                    ja["std_accuracy"] = agg.std_accuracy;
                                    ja["mean_binary_accuracy"] = agg.mean_binary_accuracy;
                                    ja["runs"] = agg.reports.size();
                                    report_file << ja.dump() << '\n';
                                    report_file.flush();
                                }
                                if (!grid.windows_s.empty())
                                    window_trend[window] = agg.mean_accuracy;
                                results.push_back(std::move(agg));
                            }

    if (report_file && window_trend.size() > 1) {
        int non_decreasing = 0, steps = 0;
        double prev = -1.0;
        bool first = true;
        for (const auto& [w, acc] : window_trend) {
            if (!first) {
                ++steps;
                if (acc >= prev) ++non_decreasing;
            }
            prev = acc;
            first = false;
        }
        json jt;
        jt["type"] = "trend";
        jt["axis"] = "window_s";
        jt["monotone_fraction"] = static_cast<double>(non_decreasing) / steps;
        report_file << jt.dump() << '\n';
    }
    return results;
}

// --- fusion cost ------------------------------------------------------------------------

FusionCostReport compare_fusion_cost(model::ActivityModel& early, model::ActivityModel& late,
                                     const std::vector<model::Sample>& samples) {
    if (samples.empty()) throw std::invalid_argument("compare_fusion_cost: no samples");
    FusionCostReport r;
    r.early_madds_estimate = early.encoder_forward_madds();
    r.late_madds_estimate = late.encoder_forward_madds();

    auto measure = [&samples](model::ActivityModel& net, std::uint64_t& madds) {
        nn::ScopedOpCount scope;
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto& s : samples) net.forward(s);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        madds = nn::OpCount::take() / samples.size();
        return ms / static_cast<double>(samples.size());
    };
    r.early_ms_per_sample = measure(early, r.early_madds);
    r.late_ms_per_sample = measure(late, r.late_madds);
    r.madds_ratio = static_cast<double>(r.late_madds) / static_cast<double>(r.early_madds);
    return r;
}

std::string fusion_cost_to_json(const FusionCostReport& r) {
    json j;
    j["type"] = "fusion_cost";
    j["early_madds"] = r.early_madds;
    j["late_madds"] = r.late_madds;
    j["early_madds_estimate"] = r.early_madds_estimate;
    j["late_madds_estimate"] = r.late_madds_estimate;
    j["early_ms_per_sample"] = r.early_ms_per_sample;
    j["late_ms_per_sample"] = r.late_ms_per_sample;
    j["madds_ratio"] = r.madds_ratio;
    return j.dump();
}

} // namespace uwbdar::bench
