#pragma once

#include "uwbdar/rng.hpp"
#include "uwbdar/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace uwbdar::nn {

/// Flat view of one trainable tensor (value + gradient share indexing).
struct ParamRef {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    Index size = 0;
};

/// Multiply-add counter for inference-cost measurements. Only matrix products
/// are counted; element-wise work is ignored on both the measured and the
/// estimated side so the two agree.
struct OpCount {
    static thread_local bool enabled;
    static thread_local std::uint64_t madds;

    static void add(std::uint64_t n) {
        if (enabled) madds += n;
    }
    static std::uint64_t take() {
        const std::uint64_t v = madds;
        madds = 0;
        return v;
    }
};

struct ScopedOpCount {
    ScopedOpCount() {
        OpCount::enabled = true;
        OpCount::madds = 0;
    }
    ~ScopedOpCount() { OpCount::enabled = false; }
};

// --- activations -----------------------------------------------------------

Matrix gelu(const Matrix& x);
Matrix gelu_grad(const Matrix& x); // d gelu / dx, element-wise

/// Row-wise softmax.
Matrix softmax_rows(const Matrix& s);

/// Backward through row-wise softmax: given P = softmax(S) and dP, return dS.
Matrix softmax_rows_backward(const Matrix& p, const Matrix& dp);

/// Cross-entropy of a single logit vector against an integer label.
/// Returns the loss; `dlogits` receives softmax(logits) - onehot(label).
double cross_entropy(const Vector& logits, int label, Vector& dlogits);

// --- layers ------------------------------------------------------------------

struct Linear {
    Matrix W;  // out x in
    Vector b;  // out
    Matrix gW;
    Vector gb;
    Matrix x_cache;

    void init(Index in, Index out, Rng& rng);
    Matrix forward(const Matrix& x); // (N x in) -> (N x out)
    Matrix backward(const Matrix& dy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

struct LayerNorm {
    Vector gamma, beta;
    Vector g_gamma, g_beta;
    double eps = 1e-5;
    Matrix xhat_cache;
    Vector inv_std_cache;

    void init(Index dim);
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& dy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

struct MultiHeadSelfAttention {
    int heads = 1;
    Linear qkv;  // d -> 3d
    Linear proj; // d -> d
    Matrix q_cache, k_cache, v_cache;
    std::vector<Matrix> attn_cache; // per-head softmax matrices

    void init(Index dim, int num_heads, Rng& rng);
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& dy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

struct Mlp {
    Linear fc1, fc2;
    Matrix pre_cache;

    void init(Index dim, Index hidden, Rng& rng);
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& dy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

/// Pre-norm transformer block: x + attn(ln1(x)), then x + mlp(ln2(x)).
struct EncoderBlock {
    LayerNorm ln1, ln2;
    MultiHeadSelfAttention attn;
    Mlp mlp;

    void init(Index dim, int heads, Index mlp_hidden, Rng& rng);
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& dy);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

struct Encoder {
    std::vector<EncoderBlock> blocks;
    Index dim = 0;

    void init(Index d, int layers, int heads, double mlp_ratio, Rng& rng);
    Matrix forward(const Matrix& tokens);
    Matrix backward(const Matrix& dtokens);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

    /// Matrix-product multiply-adds of one forward pass over n tokens.
    std::uint64_t forward_madds(Index n_tokens) const;
};

// --- convolution -------------------------------------------------------------

/// Channelled 2-D feature maps stored position-major: data(row*cols+col, ch).
struct FeatureMaps {
    Index rows = 0, cols = 0;
    Matrix data; // (rows*cols) x channels

    static FeatureMaps from_matrix(const Matrix& image);
    Index channels() const { return data.cols(); }
};

/// Valid-padding strided convolution via im2col.
struct Conv2d {
    Index in_ch = 1, out_ch = 1, kh = 3, kw = 3, stride = 1;
    Matrix W; // out_ch x (in_ch*kh*kw)
    Vector b;
    Matrix gW;
    Vector gb;
    Matrix cols_cache;
    Index in_rows_cache = 0, in_cols_cache = 0;

    void init(Index in_channels, Index out_channels, Index kernel_h, Index kernel_w, Index s,
              Rng& rng);
    FeatureMaps forward(const FeatureMaps& x);
    FeatureMaps backward(const FeatureMaps& dy); // returns gradient wrt input
    Index out_rows(Index in_rows) const { return (in_rows - kh) / stride + 1; }
    Index out_cols(Index in_cols) const { return (in_cols - kw) / stride + 1; }
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

// --- optimizer ---------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    /// Applies one update over the referenced parameters and clears nothing;
    /// call zero_grads separately. State is keyed by traversal order.
    void step(const std::vector<ParamRef>& params);
    void reset();

private:
    AdamConfig cfg_;
    std::vector<Vector> m_, v_;
    long t_ = 0;
};

void zero_grads(const std::vector<ParamRef>& params);
Index total_size(const std::vector<ParamRef>& params);

} // namespace uwbdar::nn
