// Command-line front end: synthetic data generation, preprocessing,
// pre-training, training, few-shot adaptation, evaluation, ablation sweeps,
// and ingestion of external recordings.
//
// Exit codes: 0 success, 1 usage error, 2 data/runtime error.

#include "uwbdar/bench.hpp"
#include "uwbdar/io.hpp"
#include "uwbdar/maps.hpp"
#include "uwbdar/model.hpp"
#include "uwbdar/sim.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uwbdar;

namespace {

struct CommonFlags {
    std::uint64_t seed = 7;
    std::string config;
    std::string out = "out";
    std::string adapt = "isa";
    std::string domain = "fusion";
    std::string fusion; // empty = proposed design, "early"/"late" = baselines
};

maps::Band band_from_string(const std::string& s) {
    if (s == "lower") return maps::Band::Lower;
    if (s == "higher") return maps::Band::Higher;
    if (s == "full") return maps::Band::Full;
    throw CLI::ValidationError("--band", "must be lower|higher|full");
}

model::BaselineFusion fusion_from_string(const std::string& s) {
    if (s.empty() || s == "none") return model::BaselineFusion::None;
    if (s == "early") return model::BaselineFusion::Early;
    if (s == "late") return model::BaselineFusion::Late;
    throw CLI::ValidationError("--fusion", "must be early|late");
}

void write_resolved_config(const json& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "resolved_config.json");
    out << cfg.dump(2) << '\n';
}

json prep_to_json(const bench::PrepConfig& p) {
    return json{{"window_s", p.window_s},     {"stride_s", p.stride_s},
                {"crop", p.crop_roi ? "roi" : "full"}, {"roi_rows", {p.roi_row_start, p.roi_row_end}},
                {"band", maps::to_string(p.band)},     {"log_magnitude", p.log_magnitude}};
}

json mspec_to_json(const model::ModelSpec& m) {
    return json{{"domain", to_string(m.domain)},
                {"strategy", to_string(m.strategy)},
                {"baseline", to_string(m.baseline)},
                {"num_classes", m.num_classes},
                {"d_freq", m.d_freq},
                {"freq_channels", m.freq_channels},
                {"classifier_h1", m.classifier_h1},
                {"classifier_h2", m.classifier_h2},
                {"beta_trainable", m.beta_trainable},
                {"beta_init", m.beta_init},
                {"seed", m.seed}};
}

json tcfg_to_json(const model::TrainConfig& t) {
    return json{{"lr", t.lr},     {"epochs", t.epochs},
                {"batch", t.batch}, {"adapt_epochs", t.adapt_epochs},
                {"adapt_batch", t.adapt_batch}, {"seed", t.seed}};
}

// Experiment settings shared by train / adapt-fewshot / eval / ablate.
struct RunFlags {
    std::string data;   // manifest path; empty = generate the default synthetic set
    std::string bundle; // bundle path; empty = random-init bundle
    int subjects = 6;
    int samples_per_pair = 4;
    bench::PrepConfig prep;
    model::ModelSpec mspec;
    model::TrainConfig tcfg;
    int holdout = -1; // subject id; -1 = last subject
    int shots = 0;
    int threads = 2;
    int repeats = 3;
};

std::vector<PulseMatrix> load_or_generate(const RunFlags& run, std::uint64_t seed) {
    if (!run.data.empty()) return io::load_dataset(run.data);
    std::cerr << "no --data given, generating the default synthetic dataset ("
              << run.subjects << " subjects x 7 activities x " << run.samples_per_pair
              << ")\n";
    return sim::generate_dataset(
        sim::default_sim_config(run.subjects, run.samples_per_pair, seed));
}

model::PretrainedBundle load_or_random_bundle(const std::string& path, std::uint64_t seed) {
    if (!path.empty()) return io::load_bundle(path);
    std::cerr << "no --bundle given, using random initialization (provenance=random)\n";
    model::EncoderConfig cfg;
    return model::random_bundle(cfg, seed);
}

int pick_holdout(const std::vector<bench::SampleMeta>& meta, int requested) {
    int last = meta.front().subject_id;
    bool found = false;
    for (const auto& m : meta) {
        last = std::max(last, m.subject_id);
        if (m.subject_id == requested) found = true;
    }
    if (requested >= 0 && !found)
        throw std::invalid_argument("holdout subject " + std::to_string(requested) +
                                    " not present in the dataset");
    return requested >= 0 ? requested : last;
}

json full_config_json(const CommonFlags& common, const RunFlags& run) {
    json j;
    j["seed"] = common.seed;
    j["data"] = run.data;
    j["bundle"] = run.bundle;
    j["subjects"] = run.subjects;
    j["samples_per_pair"] = run.samples_per_pair;
    j["holdout"] = run.holdout;
    j["shots"] = run.shots;
    j["prep"] = prep_to_json(run.prep);
    j["model"] = mspec_to_json(run.mspec);
    j["train"] = tcfg_to_json(run.tcfg);
    return j;
}

void add_prep_flags(CLI::App* cmd, RunFlags& run, std::string& band, std::string& crop) {
    cmd->add_option("--window", run.prep.window_s, "observation window in seconds");
    cmd->add_option("--stride", run.prep.stride_s, "window stride in seconds");
    cmd->add_option("--crop", crop, "range rows: roi|full");
    cmd->add_option("--band", band, "frequency rows: lower|higher|full");
}

void add_train_flags(CLI::App* cmd, RunFlags& run) {
    cmd->add_option("--lr", run.tcfg.lr, "learning rate, in [1e-5, 1e-4]");
    cmd->add_option("--epochs", run.tcfg.epochs, "training epochs");
    cmd->add_option("--batch", run.tcfg.batch, "batch size");
    cmd->add_option("--adapt-epochs", run.tcfg.adapt_epochs, "few-shot adaptation epochs");
    cmd->add_option("--adapt-batch", run.tcfg.adapt_batch, "few-shot adaptation batch size");
    cmd->add_option("--d-freq", run.mspec.d_freq, "frequency feature dimension");
    cmd->add_option("--no-beta-train", run.mspec.beta_trainable,
                    "set 0 to freeze the fusion factor");
    cmd->add_option("--beta-init", run.mspec.beta_init, "initial fusion factor");
}

void resolve_mode(const CommonFlags& common, RunFlags& run, const std::string& band,
                  const std::string& crop) {
    run.mspec.strategy = model::strategy_from_string(common.adapt);
    run.mspec.domain = model::domain_from_string(common.domain);
    run.mspec.baseline = fusion_from_string(common.fusion);
    if (!band.empty()) run.prep.band = band_from_string(band);
    if (!crop.empty()) run.prep.crop_roi = (crop == "roi");
    run.tcfg.seed = common.seed;
    run.mspec.seed = common.seed;
}

// train + optional few-shot adaptation + eval on the held-out subject
int run_train_eval(const CommonFlags& common, RunFlags& run, bool adapt_only, bool eval_only) {
    auto raw = load_or_generate(run, common.seed);
    auto ds = bench::prepare_dataset(raw, run.prep, run.mspec.domain, run.mspec.baseline);
    if (ds.samples.empty()) throw std::invalid_argument("no samples after preprocessing");
    const int holdout = pick_holdout(ds.metadata, run.holdout);
    run.holdout = holdout;

    bench::Fold fold;
    fold.held_out_subject = holdout;
    for (const auto& m : ds.metadata)
        (m.subject_id == holdout ? fold.test_ids : fold.train_ids).push_back(m.sample_id);

    auto bundle = load_or_random_bundle(run.bundle, common.seed);
    model::ModelSpec mspec = run.mspec;
    mspec.seed = common.seed;
    model::TrainConfig tcfg = run.tcfg;
    tcfg.seed = common.seed;
    model::ActivityModel net(mspec, bundle, ds.range_rows, ds.range_cols, ds.freq_rows,
                             ds.freq_cols);

    const fs::path out_dir = common.out;
    fs::create_directories(out_dir);
    const std::string weights_path = (out_dir / "weights.uwbb").string();

    if (eval_only || adapt_only) {
        io::load_model_weights(net, weights_path);
    } else {
        std::vector<model::Sample> train_set;
        for (int id : fold.train_ids) train_set.push_back(ds.samples[id]);
        auto result = model::train(net, train_set, tcfg);
        json trace;
        trace["loss_trace"] = result.loss_trace;
        std::ofstream(out_dir / "loss_trace.json") << trace.dump(2) << '\n';
    }

    std::vector<int> test_ids = fold.test_ids;
    if (run.shots > 0 && !eval_only) {
        // balanced round-robin shot pick over classes, removed from the test set
        std::map<int, std::vector<int>> by_label;
        for (int id : fold.test_ids) by_label[ds.samples[id].label].push_back(id);
        std::vector<int> shot_ids;
        for (std::size_t round = 0; static_cast<int>(shot_ids.size()) < run.shots; ++round) {
            bool any = false;
            for (auto& [label, ids] : by_label)
                if (round < ids.size() && static_cast<int>(shot_ids.size()) < run.shots) {
                    shot_ids.push_back(ids[round]);
                    any = true;
                }
            if (!any) break;
        }
        std::set<int> shot_set(shot_ids.begin(), shot_ids.end());
        std::vector<model::Sample> shots;
        for (int id : shot_ids) shots.push_back(ds.samples[id]);
        test_ids.clear();
        for (int id : fold.test_ids)
            if (!shot_set.count(id)) test_ids.push_back(id);
        net = model::few_shot_adapt(net, shots, tcfg);
    }

    io::save_model_weights(net, weights_path);

    std::vector<int> predictions, labels;
    for (int id : test_ids) {
        predictions.push_back(net.predict(ds.samples[id]));
        labels.push_back(ds.samples[id].label);
    }
    auto report = bench::score(predictions, labels, mspec.num_classes);
    report.config_fingerprint = "cli;holdout=" + std::to_string(holdout);
    report.seed = common.seed;

    std::ofstream rf(out_dir / "report.jsonl", std::ios::app);
    rf << bench::report_to_json(report) << '\n';

    std::ofstream summary(out_dir / "summary.txt");
    summary << "holdout subject: " << holdout << "\n";
    summary << "test samples: " << labels.size() << "\n";
    summary << "accuracy: " << report.accuracy << "\n";
    summary << "binary distracted accuracy (" << report.binary_mapping
            << "): " << report.binary_distracted_accuracy << "\n";
    summary << "confusion (rows=true, cols=predicted):\n" << report.confusion << "\n";

    json cfg = full_config_json(common, run);
    cfg["command"] = eval_only ? "eval" : (adapt_only ? "adapt-fewshot" : "train");
    cfg["bundle_provenance"] = bundle.provenance;
    write_resolved_config(cfg, common.out);

    std::cout << "accuracy " << report.accuracy << ", binary "
              << report.binary_distracted_accuracy << " -> " << (out_dir / "report.jsonl").string()
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"IR-UWB driver-activity pipeline: simulation, input-size-agnostic "
                 "transformer training, and benchmarking"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand name

    CommonFlags common;
    app.add_option("--seed", common.seed, "global random seed")->capture_default_str();
    app.add_option("--config", common.config, "JSON config file (simulate)");
    app.add_option("--out", common.out, "output directory")->capture_default_str();
    app.add_option("--adapt", common.adapt, "input adaptation: isa|simple|patchshape|pevmanip")
        ->capture_default_str();
    app.add_option("--domain", common.domain, "input domain: range|freq|fusion|range-doppler")
        ->capture_default_str();
    app.add_option("--fusion", common.fusion,
                   "transformer-baseline fusion arrangement: early|late");

    RunFlags run;
    std::string band, crop;

    // simulate ---------------------------------------------------------------
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset");
    int sim_subjects = 6, sim_spp = 4;
    sim_cmd->add_option("--subjects", sim_subjects, "number of subjects");
    sim_cmd->add_option("--samples-per-pair", sim_spp, "samples per (subject, activity)");

    // preprocess --------------------------------------------------------------
    auto* prep_cmd = app.add_subcommand("preprocess", "emit domain maps for a dataset");
    std::string prep_data;
    prep_cmd->add_option("--data", prep_data, "input manifest.jsonl")->required();
    add_prep_flags(prep_cmd, run, band, crop);

    // pretrain ----------------------------------------------------------------
    auto* pre_cmd = app.add_subcommand("pretrain", "toy pre-training on the shape proxy task");
    model::EncoderConfig enc_cfg;
    model::ToyTaskConfig toy_cfg;
    pre_cmd->add_option("--d", enc_cfg.d, "embedding dimension");
    pre_cmd->add_option("--layers", enc_cfg.layers, "encoder blocks");
    pre_cmd->add_option("--heads", enc_cfg.heads, "attention heads");
    pre_cmd->add_option("--samples-per-class", toy_cfg.samples_per_class, "task size");
    pre_cmd->add_option("--epochs", toy_cfg.epochs, "pre-training epochs");
    pre_cmd->add_option("--lr", toy_cfg.lr, "pre-training learning rate");

    // train / adapt-fewshot / eval ---------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train on all subjects but one");
    auto* adapt_cmd = app.add_subcommand("adapt-fewshot",
                                         "few-shot adapt trained weights to the held-out subject");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate trained weights on the held-out subject");
    for (auto* cmd : {train_cmd, adapt_cmd, eval_cmd}) {
        cmd->add_option("--data", run.data, "dataset manifest (default: synthetic)");
        cmd->add_option("--bundle", run.bundle, "pre-trained bundle file");
        cmd->add_option("--subjects", run.subjects, "synthetic dataset subjects");
        cmd->add_option("--samples-per-pair", run.samples_per_pair, "synthetic dataset density");
        cmd->add_option("--holdout", run.holdout, "held-out subject id (default: last)");
        add_prep_flags(cmd, run, band, crop);
        add_train_flags(cmd, run);
    }
    adapt_cmd->add_option("--shots", run.shots, "few-shot sample count")->required();
    train_cmd->add_option("--shots", run.shots, "few-shot sample count after training");

    // ablate --------------------------------------------------------------------
    auto* ablate_cmd = app.add_subcommand("ablate", "Cartesian ablation sweep");
    std::vector<std::string> grid_specs;
    ablate_cmd->add_option("--grid", grid_specs,
                           "axis=comma,separated,values; axes: window, crop, band, shots, "
                           "domain, strategy, fusion");
    ablate_cmd->add_option("--data", run.data, "dataset manifest (default: synthetic)");
    ablate_cmd->add_option("--bundle", run.bundle, "pre-trained bundle file");
    ablate_cmd->add_option("--subjects", run.subjects, "synthetic dataset subjects");
    ablate_cmd->add_option("--samples-per-pair", run.samples_per_pair, "synthetic density");
    ablate_cmd->add_option("--repeats", run.repeats, "repeated runs per cell");
    ablate_cmd->add_option("--threads", run.threads, "parallel fold workers");
    add_prep_flags(ablate_cmd, run, band, crop);
    add_train_flags(ablate_cmd, run);

    // ingest ----------------------------------------------------------------------
    auto* ingest_cmd = app.add_subcommand("ingest", "convert external recordings");
    std::string ingest_dir, ingest_mapping;
    ingest_cmd->add_option("--dir", ingest_dir, "directory of recordings")->required();
    ingest_cmd->add_option("--mapping", ingest_mapping, "mapping config JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim_cmd->parsed()) {
            sim::SimConfig cfg = common.config.empty()
                                     ? sim::default_sim_config(sim_subjects, sim_spp, common.seed)
                                     : sim::load_sim_config(common.config);
            auto data = sim::generate_dataset(cfg);
            io::save_dataset(data, common.out);
            sim::save_sim_config(cfg, (fs::path(common.out) / "sim_config.json").string());
            json j;
            j["command"] = "simulate";
            j["seed"] = common.seed;
            j["samples"] = data.size();
            j["config"] = common.config.empty() ? "(default)" : common.config;
            write_resolved_config(j, common.out);
            std::cout << "wrote " << data.size() << " samples to " << common.out << "\n";
            return 0;
        }

        if (prep_cmd->parsed()) {
            resolve_mode(common, run, band, crop);
            auto raw = io::load_dataset(prep_data);
            auto ds = bench::prepare_dataset(raw, run.prep, run.mspec.domain, run.mspec.baseline);
            fs::create_directories(common.out);
            std::vector<io::ManifestEntry> entries;
            const bool doppler = run.mspec.domain == model::DomainMode::RangeDoppler;
            char name[64];
            for (std::size_t i = 0; i < ds.samples.size(); ++i) {
                const auto& s = ds.samples[i];
                if (s.range.size() > 0) {
                    io::SampleRecord rec;
                    rec.kind = doppler ? io::SampleKind::RangeDoppler : io::SampleKind::RangeTime;
                    rec.data = s.range;
                    rec.label = static_cast<Activity>(s.label);
                    rec.subject_id = static_cast<std::uint16_t>(s.subject_id);
                    std::snprintf(name, sizeof(name), "map_%05zu_range.uwbs", i);
                    io::save_sample(rec, (fs::path(common.out) / name).string());
                }
                if (s.freq.size() > 0) {
                    io::SampleRecord rec;
                    rec.kind = io::SampleKind::FrequencyTime;
                    rec.data = s.freq;
                    rec.label = static_cast<Activity>(s.label);
                    rec.subject_id = static_cast<std::uint16_t>(s.subject_id);
                    std::snprintf(name, sizeof(name), "map_%05zu_freq.uwbs", i);
                    io::save_sample(rec, (fs::path(common.out) / name).string());
                }
            }
            json j;
            j["command"] = "preprocess";
            j["seed"] = common.seed;
            j["prep"] = prep_to_json(run.prep);
            j["domain"] = common.domain;
            j["samples"] = ds.samples.size();
            write_resolved_config(j, common.out);
            std::cout << "wrote " << ds.samples.size() << " prepared sample(s) to " << common.out
                      << "\n";
            return 0;
        }

        if (pre_cmd->parsed()) {
            toy_cfg.seed = common.seed;
            enc_cfg.seed = common.seed;
            model::TrainResult trace;
            auto bundle = model::toy_pretrain(enc_cfg, toy_cfg, &trace);
            fs::create_directories(common.out);
            io::save_bundle(bundle, (fs::path(common.out) / "bundle.uwbb").string());
            auto stats = model::pev_similarity(bundle.pev);
            json j;
            j["command"] = "pretrain";
            j["seed"] = common.seed;
            j["d"] = enc_cfg.d;
            j["layers"] = enc_cfg.layers;
            j["heads"] = enc_cfg.heads;
            j["samples_per_class"] = toy_cfg.samples_per_class;
            j["epochs"] = toy_cfg.epochs;
            j["lr"] = toy_cfg.lr;
            j["pev_adjacent_cosine"] = stats.adjacent_mean;
            j["pev_far_cosine"] = stats.far_mean;
            j["loss_trace"] = trace.loss_trace;
            write_resolved_config(j, common.out);
            std::cout << "bundle written; final loss=" << trace.loss_trace.back()
                      << "; PEV cosine adjacent=" << stats.adjacent_mean
                      << " far=" << stats.far_mean << "\n";
            return 0;
        }

        if (train_cmd->parsed() || adapt_cmd->parsed() || eval_cmd->parsed()) {
            resolve_mode(common, run, band, crop);
            return run_train_eval(common, run, adapt_cmd->parsed(), eval_cmd->parsed());
        }

        if (ablate_cmd->parsed()) {
            resolve_mode(common, run, band, crop);
            bench::GridSpec grid;
            grid.repeats = run.repeats;
            for (const auto& spec : grid_specs) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos)
                    throw std::invalid_argument("--grid expects axis=v1,v2,...; got " + spec);
                const std::string axis = spec.substr(0, eq);
                std::vector<std::string> values;
                std::string rest = spec.substr(eq + 1);
                std::size_t pos = 0;
                while ((pos = rest.find(',')) != std::string::npos) {
                    values.push_back(rest.substr(0, pos));
                    rest.erase(0, pos + 1);
                }
                values.push_back(rest);
                if (axis == "window")
                    for (const auto& v : values) grid.windows_s.push_back(std::stod(v));
                else if (axis == "crop")
                    for (const auto& v : values) grid.crops.push_back(v == "roi");
                else if (axis == "band")
                    for (const auto& v : values) grid.bands.push_back(band_from_string(v));
                else if (axis == "shots")
                    for (const auto& v : values) grid.shots.push_back(std::stoi(v));
                else if (axis == "domain")
                    for (const auto& v : values)
                        grid.domains.push_back(model::domain_from_string(v));
                else if (axis == "strategy")
                    for (const auto& v : values)
                        grid.strategies.push_back(model::strategy_from_string(v));
                else if (axis == "fusion")
                    for (const auto& v : values) grid.fusions.push_back(fusion_from_string(v));
                else
                    throw std::invalid_argument("unknown grid axis: " + axis);
            }

            auto raw = load_or_generate(run, common.seed);
            auto bundle = load_or_random_bundle(run.bundle, common.seed);

            bench::ExperimentConfig base;
            base.mspec = run.mspec;
            base.tcfg = run.tcfg;
            base.prep = run.prep;
            base.repeats = run.repeats;
            base.base_seed = common.seed;
            base.threads = run.threads;

            fs::create_directories(common.out);
            const std::string report_path = (fs::path(common.out) / "reports.jsonl").string();
            auto results = bench::run_ablation(grid, raw, bundle, base, report_path);

            json j = full_config_json(common, run);
            j["command"] = "ablate";
            j["grid"] = grid_specs;
            j["repeats"] = run.repeats;
            j["cells"] = results.size();
            j["bundle_provenance"] = bundle.provenance;
            write_resolved_config(j, common.out);

            std::ofstream summary(fs::path(common.out) / "summary.txt");
            for (const auto& r : results)
                summary << r.fingerprint << "  mean_acc=" << r.mean_accuracy
                        << " std=" << r.std_accuracy << "\n";
            std::cout << results.size() << " cell(s) -> " << report_path << "\n";
            return 0;
        }

        if (ingest_cmd->parsed()) {
            auto mapping = io::load_ingest_mapping(ingest_mapping);
            auto result = io::ingest_directory(ingest_dir, mapping, common.out);
            json j;
            j["command"] = "ingest";
            j["dir"] = ingest_dir;
            j["mapping"] = ingest_mapping;
            j["converted"] = result.manifest.size();
            j["skipped"] = result.skipped.size();
            write_resolved_config(j, common.out);
            std::cout << "converted " << result.manifest.size() << ", skipped "
                      << result.skipped.size() << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
