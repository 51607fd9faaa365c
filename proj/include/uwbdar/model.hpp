#pragma once

#include "uwbdar/adapt.hpp"
#include "uwbdar/nn.hpp"
#include "uwbdar/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace uwbdar::model {

struct EncoderConfig {
    int d = 64; // 1024 mirrors the full-scale reference model; 64 is desk scale
    int layers = 2;
    int heads = 4;
    double mlp_ratio = 4.0;
    std::uint64_t seed = 0;
};

/// Everything transferred from pre-training: projection kernels at the
/// original 16x16 size, the 14x14 PEV grid, class token and encoder weights.
struct PretrainedBundle {
    EncoderConfig cfg;
    adapt::ProjectionStack patch16; // d kernels of 16x16 + biases
    adapt::PevGrid pev;
    Vector class_token;
    nn::Encoder encoder;
    std::string provenance = "random"; // "toy-pretrained" | "external" | "random"
};

PretrainedBundle random_bundle(const EncoderConfig& cfg, std::uint64_t seed);

enum class AdaptStrategy : int { Isa = 0, Simple = 1, PatchShape = 2, PevManip = 3 };
enum class DomainMode : int { Range = 0, Freq = 1, Fusion = 2, RangeDoppler = 3 };
/// Transformer-baseline arrangements; None means the proposed design.
enum class BaselineFusion : int { None = 0, Early = 1, Late = 2 };

const char* to_string(AdaptStrategy s);
const char* to_string(DomainMode d);
const char* to_string(BaselineFusion f);
AdaptStrategy strategy_from_string(const std::string& s);
DomainMode domain_from_string(const std::string& s);

/// One prepared input: the range-side map (range-time or range-Doppler) and,
/// when the configuration needs it, the frequency-time map.
struct Sample {
    Matrix range;
    Matrix freq;
    int label = 0;
    int subject_id = 0;
    int sample_id = 0;
};

struct ModelSpec {
    DomainMode domain = DomainMode::Fusion;
    AdaptStrategy strategy = AdaptStrategy::Isa;
    BaselineFusion baseline = BaselineFusion::None;
    int num_classes = kNumActivities;
    int d_freq = 32;
    int freq_channels = 8;
    int classifier_h1 = 64;
    int classifier_h2 = 32;
    bool beta_trainable = true;
    double beta_init = 1.0;
    std::uint64_t seed = 0;
};

/// ViT-style branch: tokenize one map (or a two-channel pair) according to an
/// adaptation strategy, run the encoder, return the class-token feature.
/// All weights (projection, PEVs, class token, encoder) are trainable; they
/// are initialized from a pre-trained bundle through the strategy's own
/// adaptation rule.
struct VitBranch {
    AdaptStrategy strategy = AdaptStrategy::Isa;
    bool two_channel = false;
    adapt::PatchPlan plan;           // ISA geometry; src dims for the others
    Index patch_rows = 0, patch_cols = 0;
    Index grid_rows = 0, grid_cols = 0;

    adapt::ProjectionStack proj;
    adapt::ProjectionStack proj2; // second channel (early fusion only)
    adapt::PevGrid pev;
    Vector class_token;
    nn::Encoder encoder;

    Matrix g_proj_w, g_proj2_w;
    Vector g_proj_b;
    adapt::PevGrid g_pev;
    Vector g_class_token;

    Matrix patches_cache, patches2_cache;

    void init(AdaptStrategy strat, const PretrainedBundle& bundle, Index rows, Index cols,
              bool two_channel_input);
    Matrix tokenize(const Matrix& map, const Matrix* map2);
    Vector forward(const Matrix& map, const Matrix* map2 = nullptr);
    void backward(const Vector& dfeature);
    void collect(const std::string& prefix, std::vector<nn::ParamRef>& out);
    Index token_count() const { return grid_rows * grid_cols + 1; }
    std::uint64_t encoder_madds() const { return encoder.forward_madds(token_count()); }
};

/// Lightweight frequency-domain extractor: two strided valid convolutions
/// with GELU, then a global average over positions. Consumes the map at its
/// native size.
struct FreqExtractor {
    nn::Conv2d conv1, conv2;
    Matrix act1_cache, act2_cache;
    Index act2_rows_cache = 0, act2_cols_cache = 0;
    Index pos2_cache = 0;

    void init(int channels, int d_freq, Rng& rng);
    Index min_rows() const;
    Index min_cols() const;
    Vector forward(const Matrix& map);
    void backward(const Vector& dfeature);
    void collect(const std::string& prefix, std::vector<nn::ParamRef>& out);
};

/// Concatenate [feat_range ; beta * feat_freq].
Vector fuse(const Vector& feat_range, const Vector& feat_freq, double beta);

/// Class-token feature of a token sequence under the given encoder weights.
Vector encode(const adapt::TokenSequence& tokens, nn::Encoder& encoder);

/// The full configurable classifier network.
class ActivityModel {
public:
    ActivityModel(const ModelSpec& spec, const PretrainedBundle& bundle, Index range_rows,
                  Index range_cols, Index freq_rows = 0, Index freq_cols = 0);

    Vector forward(const Sample& s);
    void backward(const Vector& dlogits);
    int predict(const Sample& s); // argmax, lowest class index wins ties

    std::vector<nn::ParamRef> params();
    const ModelSpec& spec() const { return spec_; }
    double beta() const { return beta_; }
    const VitBranch& range_branch() const { return range_branch_; }
    VitBranch& range_branch() { return range_branch_; }

    /// Encoder multiply-adds of one forward pass (all encoders in the design).
    std::uint64_t encoder_forward_madds() const;

    /// Copy the branch weights back into bundle form; only valid for
    /// standard 16x16 geometry (Simple strategy or ISA on a 224x224 input).
    PretrainedBundle to_bundle(const std::string& provenance) const;

private:
    ModelSpec spec_;
    EncoderConfig enc_cfg_;
    bool use_range_ = true, use_freq_ = true;
    Index src2_rows_ = 0, src2_cols_ = 0; // early-fusion second-channel shape

    VitBranch range_branch_;
    VitBranch freq_branch_; // late-fusion second encoder
    FreqExtractor freq_net_;

    double beta_ = 1.0;
    double g_beta_ = 0.0;

    nn::Linear fc1_, fc2_, fc3_;
    Matrix pre1_cache_, pre2_cache_;
    Vector feat_freq_cache_;

    Vector head_forward(const Vector& fused);
    Vector head_backward(const Vector& dlogits);
};

struct TrainConfig {
    double lr = 1e-4; // allowed band [1e-5, 1e-4]
    int epochs = 30;
    int batch = 25;
    int adapt_epochs = 10;
    int adapt_batch = 5;
    std::uint64_t seed = 0;
};

struct TrainResult {
    std::vector<double> loss_trace; // mean loss per epoch
};

/// Thrown when the loss turns non-finite.
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

TrainResult train(ActivityModel& model, const std::vector<Sample>& train_set,
                  const TrainConfig& cfg);

/// Fine-tune every parameter on the shot list; the input model is untouched.
/// An empty shot list returns an unchanged copy (with a warning on stderr).
ActivityModel few_shot_adapt(const ActivityModel& model, const std::vector<Sample>& shots,
                             const TrainConfig& cfg);

// --- toy pre-training --------------------------------------------------------

/// Shape-and-position classification proxy task at 224x224: one bright shape
/// (disk or square) in one cell of a 3x3 grid, label = shape * 9 + cell.
/// Position-dependent labels force the PEV grid and the attention circuitry
/// to learn spatial structure.
struct ToyTaskConfig {
    int samples_per_class = 40;
    int epochs = 12;
    int batch = 25;
    double lr = 1e-3; // from-scratch rate; fine-tuning uses the [1e-5, 1e-4] band
    std::uint64_t seed = 0;
};

inline constexpr int kToyClasses = 18;

Matrix toy_shape_image(int label, Rng& rng);

PretrainedBundle toy_pretrain(const EncoderConfig& cfg, const ToyTaskConfig& task,
                              TrainResult* trace = nullptr);

/// Mean cosine similarity of PEV pairs at grid distance 1 ("adjacent") and at
/// distance >= `far_threshold`; used to verify pre-training imprinted spatial
/// structure.
struct PevSimilarityStats {
    double adjacent_mean = 0.0;
    double far_mean = 0.0;
};
PevSimilarityStats pev_similarity(const adapt::PevGrid& pev, double far_threshold = 7.0);

} // namespace uwbdar::model
