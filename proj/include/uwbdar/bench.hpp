#pragma once

#include "uwbdar/maps.hpp"
#include "uwbdar/model.hpp"
#include "uwbdar/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace uwbdar::bench {

struct SampleMeta {
    int sample_id = 0;
    int subject_id = 0;
    Activity label = Activity::Relax;
};

struct Fold {
    int held_out_subject = 0;
    std::vector<int> train_ids;
    std::vector<int> test_ids;
};

struct SplitPlan {
    std::vector<Fold> folds;
};

/// One fold per subject; rejects fewer than two subjects and duplicate
/// sample ids.
SplitPlan make_loso_splits(const std::vector<SampleMeta>& metadata);

struct EvalReport {
    Eigen::MatrixXi confusion; // row = true class, col = predicted
    Vector precision, recall, f1;
    double accuracy = 0.0;
    double binary_distracted_accuracy = 0.0;
    // Interpretation recorded with every report: Drive is the only
    // non-distracted class; Relax counts as distracted.
    std::string binary_mapping = "drive_vs_rest";
    std::vector<int> zero_prediction_classes; // precision forced to 0
    std::string config_fingerprint;
    std::uint64_t seed = 0;
};

EvalReport score(const std::vector<int>& predictions, const std::vector<int>& labels,
                 int num_classes = kNumActivities,
                 int non_distracted_class = static_cast<int>(Activity::Drive));

std::string report_to_json(const EvalReport& r);

// --- dataset preparation -------------------------------------------------------

struct PrepConfig {
    double window_s = 5.0;
    double stride_s = 5.0;
    bool crop_roi = true;            // range rows [8, 59) when true, full otherwise
    Index roi_row_start = 8;
    Index roi_row_end = 59;
    maps::Band band = maps::Band::Higher; // frequency rows: higher = [89, 178)
    bool log_magnitude = false;
};

/// Maps + crops + windowing for every raw sample. Which maps are produced
/// follows from the model arrangement (range-time or range-Doppler on the
/// range side, frequency-time when a frequency branch exists).
struct PreparedDataset {
    std::vector<model::Sample> samples;
    std::vector<SampleMeta> metadata;
    Index range_rows = 0, range_cols = 0;
    Index freq_rows = 0, freq_cols = 0;
};

PreparedDataset prepare_dataset(const std::vector<PulseMatrix>& raw, const PrepConfig& prep,
                                model::DomainMode domain,
                                model::BaselineFusion baseline = model::BaselineFusion::None);

// --- experiment running ----------------------------------------------------------

struct ExperimentConfig {
    model::ModelSpec mspec;
    model::TrainConfig tcfg;
    PrepConfig prep;
    int repeats = 3; // repeated runs per cell
    int max_folds = 0; // 0 = every LOSO fold
    int shots = 0;     // few-shot samples from the held-out subject
    std::uint64_t base_seed = 7;
    int threads = 2;
};

struct RunOutcome {
    EvalReport report;
    std::vector<double> loss_trace;
    double train_seconds = 0.0;
};

/// Train on the fold's training samples, optionally adapt on `shots` samples
/// of the held-out subject (removed from the test set), evaluate the rest.
/// Split hygiene is re-checked at runtime.
RunOutcome run_fold(const PreparedDataset& ds, const Fold& fold,
                    const model::PretrainedBundle& bundle, const ExperimentConfig& cfg,
                    std::uint64_t run_seed, const std::string& fingerprint);

struct AggregateResult {
    std::string fingerprint;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    double mean_binary_accuracy = 0.0;
    std::vector<EvalReport> reports;
};

/// All folds x repeats, scheduled over cfg.threads workers with per-job seeds;
/// aggregation is keyed by fingerprint and independent of completion order.
AggregateResult run_experiment(const PreparedDataset& ds, const model::PretrainedBundle& bundle,
                               const ExperimentConfig& cfg, const std::string& fingerprint);

// --- ablation grid -----------------------------------------------------------------

struct GridSpec {
    std::vector<double> windows_s;
    std::vector<bool> crops; // true = ROI, false = full range rows
    std::vector<maps::Band> bands;
    std::vector<int> shots;
    std::vector<model::DomainMode> domains;
    std::vector<model::AdaptStrategy> strategies;
    std::vector<model::BaselineFusion> fusions;
    int repeats = 3;
};

/// Cartesian sweep over the populated axes. Cells whose parameters do not
/// apply (a frequency-band sweep on a run without a frequency branch) are
/// skipped with a notice. Aggregates are appended to `report_path` as JSON
/// lines; numeric axes get a monotone-trend record.
std::vector<AggregateResult> run_ablation(const GridSpec& grid,
                                          const std::vector<PulseMatrix>& raw,
                                          const model::PretrainedBundle& bundle,
                                          const ExperimentConfig& base,
                                          const std::string& report_path);

// --- fusion cost ---------------------------------------------------------------------

struct FusionCostReport {
    std::uint64_t early_madds = 0; // measured matrix-product multiply-adds per sample
    std::uint64_t late_madds = 0;
    std::uint64_t early_madds_estimate = 0; // analytic encoder count
    std::uint64_t late_madds_estimate = 0;
    double early_ms_per_sample = 0.0;
    double late_ms_per_sample = 0.0;
    double madds_ratio = 0.0; // late / early, measured
};

FusionCostReport compare_fusion_cost(model::ActivityModel& early, model::ActivityModel& late,
                                     const std::vector<model::Sample>& samples);

std::string fusion_cost_to_json(const FusionCostReport& r);

} // namespace uwbdar::bench
