#include "uwbdar/nn.hpp"

#include <cmath>

namespace uwbdar::nn {

thread_local bool OpCount::enabled = false;
thread_local std::uint64_t OpCount::madds = 0;

namespace {
constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
} // namespace

Matrix gelu(const Matrix& x) {
    return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
}

Matrix gelu_grad(const Matrix& x) {
    return x.unaryExpr([](double v) {
        const double phi = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        return phi + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
    });
}

Matrix softmax_rows(const Matrix& s) {
    Matrix p = s;
    for (Index i = 0; i < p.rows(); ++i) {
        const double m = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

Matrix softmax_rows_backward(const Matrix& p, const Matrix& dp) {
    Matrix ds = p.cwiseProduct(dp);
    const Vector rowsum = ds.rowwise().sum();
    ds -= p.cwiseProduct(rowsum.replicate(1, p.cols()));
    return ds;
}

double cross_entropy(const Vector& logits, int label, Vector& dlogits) {
    if (label < 0 || label >= logits.size())
        throw std::invalid_argument("cross_entropy: label out of range");
    const double m = logits.maxCoeff();
    Vector e = (logits.array() - m).exp();
    const double z = e.sum();
    dlogits = e / z;
    const double loss = -(logits(label) - m - std::log(z));
    dlogits(label) -= 1.0;
    return loss;
}

// --- Linear -----------------------------------------------------------------

void Linear::init(Index in, Index out, Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(in + out));
    W.resize(out, in);
    for (Index i = 0; i < W.size(); ++i) W.data()[i] = rng.gaussian(0.0, std);
    b = Vector::Zero(out);
    gW = Matrix::Zero(out, in);
    gb = Vector::Zero(out);
}

Matrix Linear::forward(const Matrix& x) {
    if (x.cols() != W.cols()) throw std::invalid_argument("Linear: input dimension mismatch");
    x_cache = x;
    OpCount::add(static_cast<std::uint64_t>(x.rows()) * W.rows() * W.cols());
    Matrix y = x * W.transpose();
    y.rowwise() += b.transpose();
    return y;
}

Matrix Linear::backward(const Matrix& dy) {
    gW.noalias() += dy.transpose() * x_cache;
    gb.noalias() += dy.colwise().sum().transpose();
    return dy * W;
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".W", W.data(), gW.data(), W.size()});
    out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
}

// --- LayerNorm ----------------------------------------------------------------

void LayerNorm::init(Index dim) {
    gamma = Vector::Ones(dim);
    beta = Vector::Zero(dim);
    g_gamma = Vector::Zero(dim);
    g_beta = Vector::Zero(dim);
}

Matrix LayerNorm::forward(const Matrix& x) {
    const Index n = x.rows();
    const Index d = x.cols();
    xhat_cache.resize(n, d);
    inv_std_cache.resize(n);
    Matrix y(n, d);
    for (Index i = 0; i < n; ++i) {
        const double mu = x.row(i).mean();
        const double var = (x.row(i).array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std_cache(i) = inv;
        xhat_cache.row(i) = (x.row(i).array() - mu) * inv;
        y.row(i) = xhat_cache.row(i).cwiseProduct(gamma.transpose()) + beta.transpose();
    }
    return y;
}

Matrix LayerNorm::backward(const Matrix& dy) {
    const Index n = dy.rows();
    const Index d = dy.cols();
    Matrix dx(n, d);
    for (Index i = 0; i < n; ++i) {
        const auto xhat = xhat_cache.row(i);
        Eigen::RowVectorXd g = dy.row(i).cwiseProduct(gamma.transpose());
        const double mean_g = g.mean();
        const double mean_gx = g.cwiseProduct(xhat).mean();
        dx.row(i) = (g.array() - mean_g - xhat.array() * mean_gx) * inv_std_cache(i);
        g_gamma += dy.row(i).cwiseProduct(xhat).transpose();
        g_beta += dy.row(i).transpose();
    }
    return dx;
}

void LayerNorm::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".gamma", gamma.data(), g_gamma.data(), gamma.size()});
    out.push_back({prefix + ".beta", beta.data(), g_beta.data(), beta.size()});
}

// --- MultiHeadSelfAttention ---------------------------------------------------

void MultiHeadSelfAttention::init(Index dim, int num_heads, Rng& rng) {
    if (num_heads < 1 || dim % num_heads != 0)
        throw std::invalid_argument("attention: dim must be divisible by heads");
    heads = num_heads;
    qkv.init(dim, 3 * dim, rng);
    proj.init(dim, dim, rng);
}

Matrix MultiHeadSelfAttention::forward(const Matrix& x) {
    const Index n = x.rows();
    const Index d = x.cols();
    const Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix fused = qkv.forward(x);
    q_cache = fused.leftCols(d);
    k_cache = fused.middleCols(d, d);
    v_cache = fused.rightCols(d);

    attn_cache.assign(heads, Matrix());
    Matrix context(n, d);
    for (int h = 0; h < heads; ++h) {
        const auto qh = q_cache.middleCols(h * dh, dh);
        const auto kh = k_cache.middleCols(h * dh, dh);
        const auto vh = v_cache.middleCols(h * dh, dh);
        OpCount::add(static_cast<std::uint64_t>(n) * n * dh * 2);
        Matrix scores = (qh * kh.transpose()) * scale;
        attn_cache[h] = softmax_rows(scores);
        context.middleCols(h * dh, dh).noalias() = attn_cache[h] * vh;
    }
    return proj.forward(context);
}

Matrix MultiHeadSelfAttention::backward(const Matrix& dy) {
    const Index n = dy.rows();
    const Index d = dy.cols();
    const Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix dcontext = proj.backward(dy);
    Matrix dfused(n, 3 * d);
    for (int h = 0; h < heads; ++h) {
        const auto qh = q_cache.middleCols(h * dh, dh);
        const auto kh = k_cache.middleCols(h * dh, dh);
        const auto vh = v_cache.middleCols(h * dh, dh);
        const auto dch = dcontext.middleCols(h * dh, dh);
        const Matrix& p = attn_cache[h];

        Matrix dp = dch * vh.transpose();
        Matrix dvh = p.transpose() * dch;
        Matrix ds = softmax_rows_backward(p, dp) * scale;
        dfused.middleCols(h * dh, dh).noalias() = ds * kh;
        dfused.middleCols(d + h * dh, dh).noalias() = ds.transpose() * qh;
        dfused.middleCols(2 * d + h * dh, dh) = dvh;
    }
    return qkv.backward(dfused);
}

void MultiHeadSelfAttention::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    qkv.collect(prefix + ".qkv", out);
    proj.collect(prefix + ".proj", out);
}

// --- Mlp -----------------------------------------------------------------------

void Mlp::init(Index dim, Index hidden, Rng& rng) {
    fc1.init(dim, hidden, rng);
    fc2.init(hidden, dim, rng);
}

Matrix Mlp::forward(const Matrix& x) {
    pre_cache = fc1.forward(x);
    return fc2.forward(gelu(pre_cache));
}

Matrix Mlp::backward(const Matrix& dy) {
    Matrix dh = fc2.backward(dy);
    dh = dh.cwiseProduct(gelu_grad(pre_cache));
    return fc1.backward(dh);
}

void Mlp::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
}

// --- EncoderBlock ----------------------------------------------------------------

void EncoderBlock::init(Index dim, int heads, Index mlp_hidden, Rng& rng) {
    ln1.init(dim);
    ln2.init(dim);
    attn.init(dim, heads, rng);
    mlp.init(dim, mlp_hidden, rng);
}

Matrix EncoderBlock::forward(const Matrix& x) {
    Matrix y = x + attn.forward(ln1.forward(x));
    return y + mlp.forward(ln2.forward(y));
}

Matrix EncoderBlock::backward(const Matrix& dy) {
    Matrix dmid = dy + ln2.backward(mlp.backward(dy));
    return dmid + ln1.backward(attn.backward(dmid));
}

void EncoderBlock::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    ln1.collect(prefix + ".ln1", out);
    attn.collect(prefix + ".attn", out);
    ln2.collect(prefix + ".ln2", out);
    mlp.collect(prefix + ".mlp", out);
}

// --- Encoder ----------------------------------------------------------------------

void Encoder::init(Index d, int layers, int heads, double mlp_ratio, Rng& rng) {
    if (layers < 1) throw std::invalid_argument("Encoder: layers must be >= 1");
    dim = d;
    blocks.assign(layers, EncoderBlock());
    const Index hidden = static_cast<Index>(std::lround(mlp_ratio * static_cast<double>(d)));
    for (auto& blk : blocks) blk.init(d, heads, hidden, rng);
}

Matrix Encoder::forward(const Matrix& tokens) {
    if (tokens.cols() != dim) throw std::invalid_argument("Encoder: token dimension mismatch");
    Matrix x = tokens;
    for (auto& blk : blocks) x = blk.forward(x);
    return x;
}

Matrix Encoder::backward(const Matrix& dtokens) {
    Matrix dx = dtokens;
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) dx = it->backward(dx);
    return dx;
}

void Encoder::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    for (std::size_t i = 0; i < blocks.size(); ++i)
        blocks[i].collect(prefix + ".block" + std::to_string(i), out);
}

std::uint64_t Encoder::forward_madds(Index n_tokens) const {
    if (blocks.empty()) return 0;
    const std::uint64_t n = static_cast<std::uint64_t>(n_tokens);
    const std::uint64_t d = static_cast<std::uint64_t>(dim);
    const std::uint64_t hidden = static_cast<std::uint64_t>(blocks[0].mlp.fc1.W.rows());
    const std::uint64_t qkv = n * (3 * d) * d;
    const std::uint64_t attn = n * n * d * 2; // scores + context, summed over heads
    const std::uint64_t proj = n * d * d;
    const std::uint64_t mlp = 2 * n * d * hidden;
    return blocks.size() * (qkv + attn + proj + mlp);
}

// --- Conv2d --------------------------------------------------------------------------

FeatureMaps FeatureMaps::from_matrix(const Matrix& image) {
    FeatureMaps f;
    f.rows = image.rows();
    f.cols = image.cols();
    f.data = image.reshaped<Eigen::RowMajor>(image.rows() * image.cols(), 1);
    return f;
}

void Conv2d::init(Index in_channels, Index out_channels, Index kernel_h, Index kernel_w, Index s,
                  Rng& rng) {
    in_ch = in_channels;
    out_ch = out_channels;
    kh = kernel_h;
    kw = kernel_w;
    stride = s;
    const Index fan_in = in_ch * kh * kw;
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in + out_ch));
    W.resize(out_ch, fan_in);
    for (Index i = 0; i < W.size(); ++i) W.data()[i] = rng.gaussian(0.0, std);
    b = Vector::Zero(out_ch);
    gW = Matrix::Zero(out_ch, fan_in);
    gb = Vector::Zero(out_ch);
}

FeatureMaps Conv2d::forward(const FeatureMaps& x) {
    if (x.channels() != in_ch) throw std::invalid_argument("Conv2d: channel mismatch");
    if (x.rows < kh || x.cols < kw)
        throw std::invalid_argument("Conv2d: input " + std::to_string(x.rows) + "x" +
                                    std::to_string(x.cols) + " smaller than kernel " +
                                    std::to_string(kh) + "x" + std::to_string(kw));
    const Index oh = out_rows(x.rows);
    const Index ow = out_cols(x.cols);
    in_rows_cache = x.rows;
    in_cols_cache = x.cols;
    cols_cache.resize(oh * ow, in_ch * kh * kw);
    for (Index i = 0; i < oh; ++i) {
        for (Index j = 0; j < ow; ++j) {
            const Index pos = i * ow + j;
            for (Index c = 0; c < in_ch; ++c)
                for (Index u = 0; u < kh; ++u)
                    for (Index v = 0; v < kw; ++v)
                        cols_cache(pos, c * kh * kw + u * kw + v) =
                            x.data((i * stride + u) * x.cols + (j * stride + v), c);
        }
    }
    OpCount::add(static_cast<std::uint64_t>(oh * ow) * W.rows() * W.cols());
    FeatureMaps y;
    y.rows = oh;
    y.cols = ow;
    y.data.noalias() = cols_cache * W.transpose();
    y.data.rowwise() += b.transpose();
    return y;
}

FeatureMaps Conv2d::backward(const FeatureMaps& dy) {
    gW.noalias() += dy.data.transpose() * cols_cache;
    gb.noalias() += dy.data.colwise().sum().transpose();
    Matrix dcols = dy.data * W;

    FeatureMaps dx;
    dx.rows = in_rows_cache;
    dx.cols = in_cols_cache;
    dx.data = Matrix::Zero(in_rows_cache * in_cols_cache, in_ch);
    const Index ow = dy.cols;
    for (Index i = 0; i < dy.rows; ++i)
        for (Index j = 0; j < ow; ++j) {
            const Index pos = i * ow + j;
            for (Index c = 0; c < in_ch; ++c)
                for (Index u = 0; u < kh; ++u)
                    for (Index v = 0; v < kw; ++v)
                        dx.data((i * stride + u) * in_cols_cache + (j * stride + v), c) +=
                            dcols(pos, c * kh * kw + u * kw + v);
        }
    return dx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".W", W.data(), gW.data(), W.size()});
    out.push_back({prefix + ".b", b.data(), gb.data(), b.size()});
}

// --- Adam ------------------------------------------------------------------------------

void Adam::step(const std::vector<ParamRef>& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = Vector::Zero(params[i].size);
            v_[i] = Vector::Zero(params[i].size);
        }
    }
    if (m_.size() != params.size())
        throw std::invalid_argument("Adam: parameter list changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Eigen::Map<Vector> value(params[i].value, params[i].size);
        Eigen::Map<const Vector> grad(params[i].grad, params[i].size);
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
        value.array() -= cfg_.lr * (m_[i].array() / bc1) /
                         ((v_[i].array() / bc2).sqrt() + cfg_.eps);
    }
}

void Adam::reset() {
    m_.clear();
    v_.clear();
    t_ = 0;
}

void zero_grads(const std::vector<ParamRef>& params) {
    for (const auto& p : params) Eigen::Map<Vector>(p.grad, p.size).setZero();
}

Index total_size(const std::vector<ParamRef>& params) {
    Index n = 0;
    for (const auto& p : params) n += p.size;
    return n;
}

} // namespace uwbdar::nn
