#include "uwbdar/model.hpp"

#include "uwbdar/resize.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

namespace uwbdar::model {

const char* to_string(AdaptStrategy s) {
    switch (s) {
        case AdaptStrategy::Isa: return "isa";
        case AdaptStrategy::Simple: return "simple";
        case AdaptStrategy::PatchShape: return "patchshape";
        case AdaptStrategy::PevManip: return "pevmanip";
    }
    return "?";
}

const char* to_string(DomainMode d) {
    switch (d) {
        case DomainMode::Range: return "range";
        case DomainMode::Freq: return "freq";
        case DomainMode::Fusion: return "fusion";
        case DomainMode::RangeDoppler: return "range-doppler";
    }
    return "?";
}

const char* to_string(BaselineFusion f) {
    switch (f) {
        case BaselineFusion::None: return "none";
        case BaselineFusion::Early: return "early";
        case BaselineFusion::Late: return "late";
    }
    return "?";
}

AdaptStrategy strategy_from_string(const std::string& s) {
    for (int i = 0; i < 4; ++i)
        if (s == to_string(static_cast<AdaptStrategy>(i))) return static_cast<AdaptStrategy>(i);
    throw std::invalid_argument("unknown adaptation strategy '" + s + "'");
}

DomainMode domain_from_string(const std::string& s) {
    for (int i = 0; i < 4; ++i)
        if (s == to_string(static_cast<DomainMode>(i))) return static_cast<DomainMode>(i);
    throw std::invalid_argument("unknown domain '" + s + "'");
}

PretrainedBundle random_bundle(const EncoderConfig& cfg, std::uint64_t seed) {
    if (cfg.d < 1 || cfg.d % cfg.heads != 0)
        throw std::invalid_argument("EncoderConfig: d must be positive and divisible by heads");
    PretrainedBundle b;
    b.cfg = cfg;
    Rng rng(mix_seed(seed, 0xb0d1ULL));
    const Index d = cfg.d;
    const Index kk = adapt::kOriginalPatch * adapt::kOriginalPatch;
    b.patch16.rows = adapt::kOriginalPatch;
    b.patch16.cols = adapt::kOriginalPatch;
    b.patch16.weights.resize(d, kk);
    const double wstd = std::sqrt(2.0 / static_cast<double>(kk + d));
    for (Index i = 0; i < b.patch16.weights.size(); ++i)
        b.patch16.weights.data()[i] = rng.gaussian(0.0, wstd);
    b.patch16.bias = Vector::Zero(d);

    const Index grid = adapt::kGridSide * adapt::kGridSide;
    b.pev.d = static_cast<int>(d);
    b.pev.grid.resize(grid, d);
    for (Index i = 0; i < b.pev.grid.size(); ++i) b.pev.grid.data()[i] = rng.gaussian(0.0, 0.02);
    b.pev.class_token_pev.resize(d);
    for (Index i = 0; i < d; ++i) b.pev.class_token_pev(i) = rng.gaussian(0.0, 0.02);

    b.class_token.resize(d);
    for (Index i = 0; i < d; ++i) b.class_token(i) = rng.gaussian(0.0, 0.02);

    b.encoder.init(d, cfg.layers, cfg.heads, cfg.mlp_ratio, rng);
    b.provenance = "random";
    return b;
}

// --- VitBranch ---------------------------------------------------------------

void VitBranch::init(AdaptStrategy strat, const PretrainedBundle& bundle, Index rows, Index cols,
                     bool two_channel_input) {
    strategy = strat;
    two_channel = two_channel_input;
    if (two_channel && strategy != AdaptStrategy::Simple)
        throw std::invalid_argument("VitBranch: two-channel input requires the simple-resize path");
    encoder = bundle.encoder;
    class_token = bundle.class_token;

    plan = adapt::compute_patch_plan(rows, cols);
    switch (strategy) {
        case AdaptStrategy::Isa:
            patch_rows = patch_cols = plan.k;
            grid_rows = grid_cols = adapt::kGridSide;
            proj = adapt::adapt_stack(bundle.patch16, plan.k);
            pev = bundle.pev;
            break;
        case AdaptStrategy::Simple:
            patch_rows = patch_cols = adapt::kOriginalPatch;
            grid_rows = grid_cols = adapt::kGridSide;
            proj = bundle.patch16;
            pev = bundle.pev;
            break;
        case AdaptStrategy::PatchShape:
            patch_rows = (rows + adapt::kGridSide - 1) / adapt::kGridSide;
            patch_cols = (cols + adapt::kGridSide - 1) / adapt::kGridSide;
            grid_rows = grid_cols = adapt::kGridSide;
            proj = adapt::adapt_stack_rect(bundle.patch16, patch_rows, patch_cols);
            pev = bundle.pev;
            break;
        case AdaptStrategy::PevManip:
            patch_rows = patch_cols = adapt::kOriginalPatch;
            grid_rows = (rows + adapt::kOriginalPatch - 1) / adapt::kOriginalPatch;
            grid_cols = (cols + adapt::kOriginalPatch - 1) / adapt::kOriginalPatch;
            proj = bundle.patch16;
            pev = adapt::manipulate_pev_grid(bundle.pev, grid_rows, grid_cols);
            break;
    }
    if (two_channel) proj2 = proj;

    g_proj_w = Matrix::Zero(proj.weights.rows(), proj.weights.cols());
    if (two_channel) g_proj2_w = g_proj_w;
    g_proj_b = Vector::Zero(proj.bias.size());
    g_pev = pev;
    g_pev.grid.setZero();
    g_pev.class_token_pev.setZero();
    g_class_token = Vector::Zero(class_token.size());
}

Matrix VitBranch::tokenize(const Matrix& map, const Matrix* map2) {
    if (map.rows() != plan.src_rows || map.cols() != plan.src_cols)
        throw std::invalid_argument("VitBranch: input shape does not match configured geometry");
    if (two_channel != (map2 != nullptr))
        throw std::invalid_argument("VitBranch: channel count does not match configuration");

    switch (strategy) {
        case AdaptStrategy::Isa: {
            Matrix image = adapt::extend_and_resize(map, plan);
            patches_cache = adapt::extract_patches(image, patch_rows, patch_cols);
            break;
        }
        case AdaptStrategy::Simple: {
            Matrix image = adapt::baseline_simple_resize(map);
            patches_cache = adapt::extract_patches(image, patch_rows, patch_cols);
            break;
        }
        case AdaptStrategy::PatchShape:
        case AdaptStrategy::PevManip: {
            Matrix padded = zero_pad(map, grid_rows * patch_rows, grid_cols * patch_cols);
            patches_cache = adapt::extract_patches(padded, patch_rows, patch_cols);
            break;
        }
    }
    if (two_channel) {
        Matrix image2 = adapt::baseline_simple_resize(*map2);
        patches2_cache = adapt::extract_patches(image2, patch_rows, patch_cols);
    }

    const Index n = grid_rows * grid_cols;
    Matrix tokens(n + 1, pev.d);
    tokens.row(0) = (class_token + pev.class_token_pev).transpose();
    tokens.bottomRows(n).noalias() = patches_cache * proj.weights.transpose();
    if (two_channel) tokens.bottomRows(n).noalias() += patches2_cache * proj2.weights.transpose();
    tokens.bottomRows(n).rowwise() += proj.bias.transpose();
    tokens.bottomRows(n) += pev.grid;
    return tokens;
}

Vector VitBranch::forward(const Matrix& map, const Matrix* map2) {
    Matrix out = encoder.forward(tokenize(map, map2));
    return out.row(0).transpose();
}

void VitBranch::backward(const Vector& dfeature) {
    const Index n = grid_rows * grid_cols;
    Matrix dtokens = Matrix::Zero(n + 1, pev.d);
    dtokens.row(0) = dfeature.transpose();
    Matrix din = encoder.backward(dtokens);

    g_class_token += din.row(0).transpose();
    g_pev.class_token_pev += din.row(0).transpose();
    const auto dbody = din.bottomRows(n);
    g_pev.grid += dbody;
    g_proj_w.noalias() += dbody.transpose() * patches_cache;
    g_proj_b += dbody.colwise().sum().transpose();
    if (two_channel) g_proj2_w.noalias() += dbody.transpose() * patches2_cache;
}

void VitBranch::collect(const std::string& prefix, std::vector<nn::ParamRef>& out) {
    out.push_back({prefix + ".proj.W", proj.weights.data(), g_proj_w.data(), proj.weights.size()});
    out.push_back({prefix + ".proj.b", proj.bias.data(), g_proj_b.data(), proj.bias.size()});
    if (two_channel)
        out.push_back(
            {prefix + ".proj2.W", proj2.weights.data(), g_proj2_w.data(), proj2.weights.size()});
    out.push_back({prefix + ".pev.grid", pev.grid.data(), g_pev.grid.data(), pev.grid.size()});
    out.push_back({prefix + ".pev.cls", pev.class_token_pev.data(), g_pev.class_token_pev.data(),
                   pev.class_token_pev.size()});
    out.push_back(
        {prefix + ".class_token", class_token.data(), g_class_token.data(), class_token.size()});
    encoder.collect(prefix + ".encoder", out);
}

// --- FreqExtractor -------------------------------------------------------------

void FreqExtractor::init(int channels, int d_freq, Rng& rng) {
    conv1.init(1, channels, 5, 5, 2, rng);
    conv2.init(channels, d_freq, 3, 3, 2, rng);
}

Index FreqExtractor::min_rows() const { return conv1.kh + conv1.stride * (conv2.kh - 1); }
Index FreqExtractor::min_cols() const { return conv1.kw + conv1.stride * (conv2.kw - 1); }

Vector FreqExtractor::forward(const Matrix& map) {
    if (map.rows() < min_rows() || map.cols() < min_cols())
        throw std::invalid_argument("FreqExtractor: input " + std::to_string(map.rows()) + "x" +
                                    std::to_string(map.cols()) + " below the receptive minimum " +
                                    std::to_string(min_rows()) + "x" + std::to_string(min_cols()));
    nn::FeatureMaps f0 = nn::FeatureMaps::from_matrix(map);
    nn::FeatureMaps a1 = conv1.forward(f0);
    act1_cache = a1.data;
    nn::FeatureMaps g1{a1.rows, a1.cols, nn::gelu(a1.data)};
    nn::FeatureMaps a2 = conv2.forward(g1);
    act2_cache = a2.data;
    act2_rows_cache = a2.rows;
    act2_cols_cache = a2.cols;
    pos2_cache = a2.data.rows();
    Matrix g2 = nn::gelu(a2.data);
    return g2.colwise().mean().transpose();
}

void FreqExtractor::backward(const Vector& dfeature) {
    const double inv = 1.0 / static_cast<double>(pos2_cache);
    Matrix dg2 = (dfeature.transpose() * inv).replicate(pos2_cache, 1);
    nn::FeatureMaps d2;
    d2.rows = act2_rows_cache;
    d2.cols = act2_cols_cache;
    d2.data = dg2.cwiseProduct(nn::gelu_grad(act2_cache));
    nn::FeatureMaps dg1 = conv2.backward(d2);
    dg1.data = dg1.data.cwiseProduct(nn::gelu_grad(act1_cache));
    conv1.backward(dg1);
}

void FreqExtractor::collect(const std::string& prefix, std::vector<nn::ParamRef>& out) {
    conv1.collect(prefix + ".conv1", out);
    conv2.collect(prefix + ".conv2", out);
}

// --- fuse / encode -----------------------------------------------------------

Vector fuse(const Vector& feat_range, const Vector& feat_freq, double beta) {
    if (!feat_range.allFinite() || !feat_freq.allFinite() || !std::isfinite(beta))
        throw std::invalid_argument("fuse: non-finite input");
    Vector out(feat_range.size() + feat_freq.size());
    out.head(feat_range.size()) = feat_range;
    out.tail(feat_freq.size()) = beta * feat_freq;
    return out;
}

Vector encode(const adapt::TokenSequence& tokens, nn::Encoder& encoder) {
    return encoder.forward(tokens.tokens).row(0).transpose();
}

// --- ActivityModel -------------------------------------------------------------

ActivityModel::ActivityModel(const ModelSpec& spec, const PretrainedBundle& bundle,
                             Index range_rows, Index range_cols, Index freq_rows, Index freq_cols)
    : spec_(spec), enc_cfg_(bundle.cfg), beta_(spec.beta_init) {
    Rng rng(mix_seed(spec.seed, 0x11eadULL));

    const bool baseline = spec.baseline != BaselineFusion::None;
    use_range_ = baseline || spec.domain != DomainMode::Freq;
    use_freq_ = baseline || spec.domain == DomainMode::Freq || spec.domain == DomainMode::Fusion;

    Index head_in = 0;
    if (spec.baseline == BaselineFusion::Early) {
        if (freq_rows < 1 || freq_cols < 1)
            throw std::invalid_argument("ActivityModel: early fusion needs both map shapes");
        range_branch_.init(AdaptStrategy::Simple, bundle, range_rows, range_cols, true);
        src2_rows_ = freq_rows;
        src2_cols_ = freq_cols;
        head_in = enc_cfg_.d;
    } else if (spec.baseline == BaselineFusion::Late) {
        range_branch_.init(AdaptStrategy::Simple, bundle, range_rows, range_cols, false);
        freq_branch_.init(AdaptStrategy::Simple, bundle, freq_rows, freq_cols, false);
        head_in = 2 * enc_cfg_.d;
    } else {
        if (use_range_) {
            range_branch_.init(spec.strategy, bundle, range_rows, range_cols, false);
            head_in += enc_cfg_.d;
        }
        if (use_freq_) {
            freq_net_.init(spec.freq_channels, spec.d_freq, rng);
            head_in += spec.d_freq;
        }
    }

    fc1_.init(head_in, spec.classifier_h1, rng);
    fc2_.init(spec.classifier_h1, spec.classifier_h2, rng);
    fc3_.init(spec.classifier_h2, spec.num_classes, rng);
}

Vector ActivityModel::head_forward(const Vector& fused) {
    pre1_cache_ = fc1_.forward(fused.transpose());
    Matrix h1 = nn::gelu(pre1_cache_);
    pre2_cache_ = fc2_.forward(h1);
    Matrix h2 = nn::gelu(pre2_cache_);
    return fc3_.forward(h2).row(0).transpose();
}

Vector ActivityModel::head_backward(const Vector& dlogits) {
    Matrix dh2 = fc3_.backward(dlogits.transpose());
    Matrix dpre2 = dh2.cwiseProduct(nn::gelu_grad(pre2_cache_));
    Matrix dh1 = fc2_.backward(dpre2);
    Matrix dpre1 = dh1.cwiseProduct(nn::gelu_grad(pre1_cache_));
    return fc1_.backward(dpre1).row(0).transpose();
}

Vector ActivityModel::forward(const Sample& s) {
    switch (spec_.baseline) {
        case BaselineFusion::Early: {
            if (s.freq.rows() != src2_rows_ || s.freq.cols() != src2_cols_)
                throw std::invalid_argument("ActivityModel: frequency map shape mismatch");
            Vector f = range_branch_.forward(s.range, &s.freq);
            return head_forward(f);
        }
        case BaselineFusion::Late: {
            Vector fa = range_branch_.forward(s.range);
            Vector fb = freq_branch_.forward(s.freq);
            return head_forward(fuse(fa, fb, 1.0));
        }
        case BaselineFusion::None: break;
    }
    switch (spec_.domain) {
        case DomainMode::Range:
        case DomainMode::RangeDoppler:
            return head_forward(range_branch_.forward(s.range));
        case DomainMode::Freq:
            return head_forward(freq_net_.forward(s.freq));
        case DomainMode::Fusion: {
            Vector fr = range_branch_.forward(s.range);
            feat_freq_cache_ = freq_net_.forward(s.freq);
            return head_forward(fuse(fr, feat_freq_cache_, beta_));
        }
    }
    throw std::logic_error("ActivityModel: unhandled configuration");
}

void ActivityModel::backward(const Vector& dlogits) {
    Vector dfused = head_backward(dlogits);
    const Index d = enc_cfg_.d;
    switch (spec_.baseline) {
        case BaselineFusion::Early:
            range_branch_.backward(dfused);
            return;
        case BaselineFusion::Late:
            range_branch_.backward(dfused.head(d));
            freq_branch_.backward(dfused.tail(d));
            return;
        case BaselineFusion::None: break;
    }
    switch (spec_.domain) {
        case DomainMode::Range:
        case DomainMode::RangeDoppler:
            range_branch_.backward(dfused);
            return;
        case DomainMode::Freq:
            freq_net_.backward(dfused);
            return;
        case DomainMode::Fusion: {
            range_branch_.backward(dfused.head(d));
            Vector dtail = dfused.tail(spec_.d_freq);
            g_beta_ += dtail.dot(feat_freq_cache_);
            freq_net_.backward(beta_ * dtail);
            return;
        }
    }
}

int ActivityModel::predict(const Sample& s) {
    Vector logits = forward(s);
    int best = 0;
    for (int c = 1; c < logits.size(); ++c)
        if (logits(c) > logits(best)) best = c;
    return best;
}

std::vector<nn::ParamRef> ActivityModel::params() {
    std::vector<nn::ParamRef> out;
    const bool baseline = spec_.baseline != BaselineFusion::None;
    if (baseline || spec_.domain != DomainMode::Freq) range_branch_.collect("range", out);
    if (spec_.baseline == BaselineFusion::Late) freq_branch_.collect("freq_vit", out);
    if (!baseline && use_freq_) freq_net_.collect("freq_net", out);
    if (!baseline && spec_.domain == DomainMode::Fusion && spec_.beta_trainable)
        out.push_back({"head.beta", &beta_, &g_beta_, 1});
    fc1_.collect("head.fc1", out);
    fc2_.collect("head.fc2", out);
    fc3_.collect("head.fc3", out);
    return out;
}

std::uint64_t ActivityModel::encoder_forward_madds() const {
    std::uint64_t total = 0;
    if (use_range_) total += range_branch_.encoder_madds();
    if (spec_.baseline == BaselineFusion::Late) total += freq_branch_.encoder_madds();
    return total;
}

PretrainedBundle ActivityModel::to_bundle(const std::string& provenance) const {
    const VitBranch& br = range_branch_;
    if (br.patch_rows != adapt::kOriginalPatch || br.patch_cols != adapt::kOriginalPatch ||
        br.grid_rows != adapt::kGridSide || br.grid_cols != adapt::kGridSide)
        throw std::invalid_argument("to_bundle: branch geometry is not the standard 16x16");
    PretrainedBundle b;
    b.cfg = enc_cfg_;
    b.patch16 = br.proj;
    b.pev = br.pev;
    b.class_token = br.class_token;
    b.encoder = br.encoder;
    b.provenance = provenance;
    return b;
}

// --- training -------------------------------------------------------------------

namespace {

TrainResult train_loop(ActivityModel& model, const std::vector<Sample>& train_set,
                       const TrainConfig& cfg) {
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    if (cfg.epochs < 1 || cfg.batch < 1) throw std::invalid_argument("train: bad epoch/batch");

    auto params = model.params();
    nn::Adam adam({cfg.lr});
    nn::zero_grads(params);

    TrainResult result;
    std::vector<int> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, 0x5c3aULL, static_cast<std::uint64_t>(epoch)));
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[i], order[static_cast<int>(
                                    shuffle_rng.below(static_cast<std::uint64_t>(i + 1)))]);

        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch, ++batch_index) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch);
            const double inv = 1.0 / static_cast<double>(stop - start);
            nn::zero_grads(params);
            for (std::size_t i = start; i < stop; ++i) {
                const Sample& s = train_set[order[i]];
                Vector logits = model.forward(s);
                Vector dlogits;
                const double loss = nn::cross_entropy(logits, s.label, dlogits);
                if (!std::isfinite(loss))
                    throw TrainingDiverged("train: non-finite loss (lr=" + std::to_string(cfg.lr) +
                                           ", batch index=" + std::to_string(batch_index) + ")");
                epoch_loss += loss;
                model.backward(dlogits * inv);
            }
            adam.step(params);
        }
        result.loss_trace.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return result;
}

} // namespace

TrainResult train(ActivityModel& model, const std::vector<Sample>& train_set,
                  const TrainConfig& cfg) {
    // the fine-tuning protocol pins the learning-rate band
    if (cfg.lr < 1e-5 || cfg.lr > 1e-4)
        throw std::invalid_argument("train: lr must lie in [1e-5, 1e-4]");
    return train_loop(model, train_set, cfg);
}

ActivityModel few_shot_adapt(const ActivityModel& model, const std::vector<Sample>& shots,
                             const TrainConfig& cfg) {
    ActivityModel adapted = model;
    if (shots.empty()) {
        std::cerr << "few_shot_adapt: empty shot list, returning weights unchanged\n";
        return adapted;
    }
    TrainConfig fine = cfg;
    fine.epochs = cfg.adapt_epochs;
    fine.batch = cfg.adapt_batch;
    train(adapted, shots, fine);
    return adapted;
}

// --- toy pre-training --------------------------------------------------------------

Matrix toy_shape_image(int label, Rng& rng) {
    if (label < 0 || label >= kToyClasses)
        throw std::invalid_argument("toy_shape_image: label out of range");
    const int side = adapt::kImageSide;
    const int shape = label / 9;
    const int cell = label % 9;
    Matrix img(side, side);
    for (Index i = 0; i < img.size(); ++i) img.data()[i] = rng.gaussian(0.0, 0.08);

    const double r = rng.uniform(12.0, 24.0);
    const double margin = r + 4.0;
    const double cw = side / 3.0;
    const double cx = (cell % 3) * cw + rng.uniform(margin, cw - margin);
    const double cy = (cell / 3) * cw + rng.uniform(margin, cw - margin);
    const double intensity = rng.uniform(0.8, 1.2);

    const Index lo_r = static_cast<Index>(std::max(0.0, cy - r - 1));
    const Index hi_r = static_cast<Index>(std::min<double>(side - 1, cy + r + 1));
    const Index lo_c = static_cast<Index>(std::max(0.0, cx - r - 1));
    const Index hi_c = static_cast<Index>(std::min<double>(side - 1, cx + r + 1));
    for (Index i = lo_r; i <= hi_r; ++i)
        for (Index j = lo_c; j <= hi_c; ++j) {
            const double dy = static_cast<double>(i) - cy;
            const double dx = static_cast<double>(j) - cx;
            const bool inside = (shape == 0) ? (dx * dx + dy * dy <= r * r)
                                             : (std::abs(dx) <= r && std::abs(dy) <= r);
            if (inside) img(i, j) += intensity;
        }
    return img;
}

PretrainedBundle toy_pretrain(const EncoderConfig& cfg, const ToyTaskConfig& task,
                              TrainResult* trace) {
    PretrainedBundle seed_bundle = random_bundle(cfg, task.seed);

    std::vector<Sample> data;
    Rng rng(mix_seed(task.seed, 0x70f5ULL));
    for (int rep = 0; rep < task.samples_per_class; ++rep)
        for (int cls = 0; cls < kToyClasses; ++cls) {
            Sample s;
            s.range = toy_shape_image(cls, rng);
            s.label = cls;
            s.sample_id = static_cast<int>(data.size());
            data.push_back(std::move(s));
        }

    ModelSpec spec;
    spec.domain = DomainMode::Range;
    spec.strategy = AdaptStrategy::Isa; // identity geometry at 224x224
    spec.num_classes = kToyClasses;
    spec.seed = task.seed;
    ActivityModel net(spec, seed_bundle, adapt::kImageSide, adapt::kImageSide);

    TrainConfig tc;
    tc.lr = task.lr; // from-scratch pre-training is not bound to the fine-tuning band
    tc.epochs = task.epochs;
    tc.batch = task.batch;
    tc.seed = task.seed;
    TrainResult result = train_loop(net, data, tc);
    if (trace) *trace = result;
    return net.to_bundle("toy-pretrained");
}

PevSimilarityStats pev_similarity(const adapt::PevGrid& pev, double far_threshold) {
    pev.validate();
    const int rows = pev.side_rows;
    const int cols = pev.side_cols;
    double adj_sum = 0.0, far_sum = 0.0;
    long adj_n = 0, far_n = 0;
    for (int a = 0; a < rows * cols; ++a) {
        for (int b = a + 1; b < rows * cols; ++b) {
            const double di = static_cast<double>(a / cols - b / cols);
            const double dj = static_cast<double>(a % cols - b % cols);
            const double dist = std::sqrt(di * di + dj * dj);
            const double cosine = pev.grid.row(a).dot(pev.grid.row(b)) /
                                  (pev.grid.row(a).norm() * pev.grid.row(b).norm() + 1e-30);
            if (dist <= 1.0) {
                adj_sum += cosine;
                ++adj_n;
            } else if (dist >= far_threshold) {
                far_sum += cosine;
                ++far_n;
            }
        }
    }
    PevSimilarityStats stats;
    stats.adjacent_mean = adj_n ? adj_sum / adj_n : 0.0;
    stats.far_mean = far_n ? far_sum / far_n : 0.0;
    return stats;
}

} // namespace uwbdar::model
