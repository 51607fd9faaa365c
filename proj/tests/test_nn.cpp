#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "uwbdar/nn.hpp"
#include "uwbdar/rng.hpp"

#include <cmath>
#include <functional>

using namespace uwbdar;

namespace {

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    Rng rng(seed);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
    return m;
}

// Central finite differences over every parameter of a module, compared
// against the analytic gradients accumulated by one backward pass.
void check_gradients(std::vector<nn::ParamRef> params, const std::function<double()>& loss_fn,
                     double tol = 1e-6) {
    const double h = 1e-5;
    for (auto& p : params) {
        for (Index i = 0; i < p.size; ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + h;
            const double up = loss_fn();
            p.value[i] = saved - h;
            const double down = loss_fn();
            p.value[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double analytic = p.grad[i];
            const double err = std::abs(fd - analytic) / std::max({1.0, std::abs(fd), std::abs(analytic)});
            if (err >= tol) {
                CAPTURE(p.name);
                CAPTURE(i);
                CHECK(err < tol);
                return;
            }
        }
    }
    CHECK(true);
}

} // namespace

TEST_CASE("gelu and its derivative agree with finite differences") {
    Matrix x = random_matrix(3, 4, 1);
    Matrix g = nn::gelu_grad(x);
    const double h = 1e-6;
    for (Index i = 0; i < x.size(); ++i) {
        Matrix xp = x, xm = x;
        xp.data()[i] += h;
        xm.data()[i] -= h;
        const double fd = (nn::gelu(xp).data()[i] - nn::gelu(xm).data()[i]) / (2 * h);
        CHECK(std::abs(fd - g.data()[i]) < 1e-8);
    }
    CHECK(nn::gelu(Matrix::Zero(1, 1))(0, 0) == 0.0);
}

TEST_CASE("softmax rows sum to one and backward matches FD") {
    Matrix s = random_matrix(4, 6, 2);
    Matrix p = nn::softmax_rows(s);
    for (Index i = 0; i < 4; ++i) CHECK(p.row(i).sum() == doctest::Approx(1.0));

    // scalar objective: sum of p .* R for a fixed random R
    Matrix r = random_matrix(4, 6, 3);
    Matrix ds = nn::softmax_rows_backward(p, r);
    const double h = 1e-6;
    for (Index i = 0; i < s.size(); ++i) {
        Matrix sp = s, sm = s;
        sp.data()[i] += h;
        sm.data()[i] -= h;
        const double fd = (nn::softmax_rows(sp).cwiseProduct(r).sum() -
                           nn::softmax_rows(sm).cwiseProduct(r).sum()) /
                          (2 * h);
        CHECK(std::abs(fd - ds.data()[i]) < 1e-7);
    }
}

TEST_CASE("cross entropy value and gradient") {
    Vector logits(3);
    logits << 1.0, 2.0, -0.5;
    Vector dl;
    const double loss = nn::cross_entropy(logits, 1, dl);
    // manual softmax reference
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(-0.5);
    CHECK(loss == doctest::Approx(-std::log(std::exp(2.0) / z)).epsilon(1e-12));
    CHECK(dl(1) == doctest::Approx(std::exp(2.0) / z - 1.0));
    CHECK(dl(0) == doctest::Approx(std::exp(1.0) / z));
    CHECK_THROWS_AS(nn::cross_entropy(logits, 3, dl), std::invalid_argument);
}

TEST_CASE("Linear backward matches FD") {
    Rng rng(7);
    nn::Linear lin;
    lin.init(5, 3, rng);
    Matrix x = random_matrix(4, 5, 8);
    Matrix r = random_matrix(4, 3, 9);
    auto loss_fn = [&] { return (lin.forward(x).cwiseProduct(r)).sum(); };
    loss_fn();
    std::vector<nn::ParamRef> params;
    lin.collect("lin", params);
    nn::zero_grads(params);
    lin.backward(r);
    check_gradients(params, loss_fn);

    // input gradient too
    Matrix dx = lin.backward(r); // accumulates again, but dx is what we want
    const double h = 1e-6;
    Matrix xp = x;
    xp(1, 2) += h;
    Matrix xm = x;
    xm(1, 2) -= h;
    const double fd = ((xp * lin.W.transpose()).cwiseProduct(r).sum() -
                       (xm * lin.W.transpose()).cwiseProduct(r).sum()) /
                      (2 * h);
    CHECK(std::abs(fd - dx(1, 2)) < 1e-7);
}

TEST_CASE("LayerNorm backward matches FD for params and inputs") {
    nn::LayerNorm ln;
    ln.init(6);
    ln.gamma = random_matrix(6, 1, 10).col(0);
    ln.beta = random_matrix(6, 1, 11).col(0);
    Matrix x = random_matrix(3, 6, 12);
    Matrix r = random_matrix(3, 6, 13);
    auto loss_fn = [&] { return ln.forward(x).cwiseProduct(r).sum(); };
    loss_fn();
    std::vector<nn::ParamRef> params;
    ln.collect("ln", params);
    nn::zero_grads(params);
    Matrix dx = ln.backward(r);
    check_gradients(params, loss_fn);

    const double h = 1e-6;
    for (Index i : {0, 7, 17}) {
        Matrix xp = x, xm = x;
        xp.data()[i] += h;
        xm.data()[i] -= h;
        const double up = ln.forward(xp).cwiseProduct(r).sum();
        const double dn = ln.forward(xm).cwiseProduct(r).sum();
        ln.forward(x);
        CHECK(std::abs((up - dn) / (2 * h) - dx.data()[i]) < 1e-6);
    }
}

TEST_CASE("attention and MLP blocks match FD") {
    Rng rng(20);
    nn::MultiHeadSelfAttention attn;
    attn.init(8, 2, rng);
    Matrix x = random_matrix(5, 8, 21);
    Matrix r = random_matrix(5, 8, 22);
    auto loss_attn = [&] { return attn.forward(x).cwiseProduct(r).sum(); };
    loss_attn();
    std::vector<nn::ParamRef> params;
    attn.collect("attn", params);
    nn::zero_grads(params);
    Matrix dx = attn.backward(r);
    check_gradients(params, loss_attn, 2e-6);

    const double h = 1e-6;
    Matrix xp = x, xm = x;
    xp(2, 3) += h;
    xm(2, 3) -= h;
    const double up = attn.forward(xp).cwiseProduct(r).sum();
    const double dn = attn.forward(xm).cwiseProduct(r).sum();
    CHECK(std::abs((up - dn) / (2 * h) - dx(2, 3)) < 1e-6);

    nn::Mlp mlp;
    mlp.init(8, 16, rng);
    auto loss_mlp = [&] { return mlp.forward(x).cwiseProduct(r).sum(); };
    loss_mlp();
    std::vector<nn::ParamRef> mparams;
    mlp.collect("mlp", mparams);
    nn::zero_grads(mparams);
    mlp.backward(r);
    check_gradients(mparams, loss_mlp);
}

TEST_CASE("encoder block and full encoder match FD") {
    Rng rng(30);
    nn::Encoder enc;
    enc.init(8, 2, 2, 2.0, rng);
    Matrix x = random_matrix(6, 8, 31);
    Matrix r = random_matrix(6, 8, 32);
    auto loss_fn = [&] { return enc.forward(x).cwiseProduct(r).sum(); };
    loss_fn();
    std::vector<nn::ParamRef> params;
    enc.collect("enc", params);
    nn::zero_grads(params);
    enc.backward(r);
    check_gradients(params, loss_fn, 2e-6);
}

TEST_CASE("conv2d forward matches a scalar loop and backward matches FD") {
    Rng rng(40);
    nn::Conv2d conv;
    conv.init(1, 3, 3, 3, 2, rng);
    Matrix img = random_matrix(9, 11, 41);
    auto x = nn::FeatureMaps::from_matrix(img);
    auto y = conv.forward(x);
    CHECK(y.rows == 4);
    CHECK(y.cols == 5);
    for (Index oc = 0; oc < 3; ++oc)
        for (Index i = 0; i < y.rows; ++i)
            for (Index j = 0; j < y.cols; ++j) {
                double acc = conv.b(oc);
                for (Index u = 0; u < 3; ++u)
                    for (Index v = 0; v < 3; ++v)
                        acc += conv.W(oc, u * 3 + v) * img(2 * i + u, 2 * j + v);
                CHECK(std::abs(y.data(i * y.cols + j, oc) - acc) < 1e-12);
            }

    Matrix r = random_matrix(y.rows * y.cols, 3, 42);
    auto loss_fn = [&] { return conv.forward(x).data.cwiseProduct(r).sum(); };
    loss_fn();
    std::vector<nn::ParamRef> params;
    conv.collect("conv", params);
    nn::zero_grads(params);
    nn::FeatureMaps dy{y.rows, y.cols, r};
    auto dx = conv.backward(dy);
    check_gradients(params, loss_fn);

    // input gradient at a covered pixel
    const double h = 1e-6;
    Matrix ip = img, im = img;
    ip(4, 4) += h;
    im(4, 4) -= h;
    auto fp = nn::FeatureMaps::from_matrix(ip);
    auto fm = nn::FeatureMaps::from_matrix(im);
    const double fd =
        (conv.forward(fp).data.cwiseProduct(r).sum() - conv.forward(fm).data.cwiseProduct(r).sum()) /
        (2 * h);
    CHECK(std::abs(fd - dx.data(4 * 11 + 4, 0)) < 1e-7);

    CHECK_THROWS_AS(conv.forward(nn::FeatureMaps::from_matrix(Matrix::Zero(2, 2))),
                    std::invalid_argument);
}

TEST_CASE("one Adam step matches the hand-computed update") {
    nn::Linear lin;
    lin.W = Matrix::Zero(1, 2);
    lin.W << 0.5, -0.25;
    lin.b = Vector::Zero(1);
    lin.gW = Matrix::Zero(1, 2);
    lin.gb = Vector::Zero(1);

    // loss = w0*2 + w1*(-3): gradient is (2, -3)
    lin.gW << 2.0, -3.0;
    std::vector<nn::ParamRef> params;
    lin.collect("lin", params);

    const double lr = 1e-4;
    nn::Adam adam({lr});
    adam.step(params);

    // First step: m_hat = g, v_hat = g^2, delta = -lr * g / (|g| + eps)
    const double eps = 1e-8;
    CHECK(std::abs(lin.W(0, 0) - (0.5 - lr * 2.0 / (2.0 + eps))) < 1e-10);
    CHECK(std::abs(lin.W(0, 1) - (-0.25 - lr * (-3.0) / (3.0 + eps))) < 1e-10);
    CHECK(lin.b(0) == 0.0); // zero gradient leaves the bias in place
}

TEST_CASE("op counter matches the analytic encoder estimate") {
    Rng rng(50);
    nn::Encoder enc;
    enc.init(8, 1, 2, 4.0, rng);
    Matrix tokens = random_matrix(197, 8, 51);
    nn::ScopedOpCount scope;
    enc.forward(tokens);
    const auto measured = nn::OpCount::take();
    CHECK(measured == enc.forward_madds(197));
}

TEST_CASE("encoder matches the straight-line reference") {
    Rng rng(60);
    nn::Encoder enc;
    enc.init(8, 2, 2, 4.0, rng);
    Matrix tokens = random_matrix(12, 8, 61);
    Matrix fast = enc.forward(tokens);
    Matrix slow = oracles::reference_encoder_forward(tokens, enc.blocks, 2);
    CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-10);
}
