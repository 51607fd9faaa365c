#include "uwbdar/dft.hpp"

#include <unsupported/Eigen/FFT>

namespace uwbdar {

Eigen::VectorXcd dft_forward(const Vector& x) {
    if (x.size() < 1) throw std::invalid_argument("dft_forward: empty input");
    // Feed the complex path so any length yields the full spectrum.
    Eigen::VectorXcd in = x.cast<std::complex<double>>();
    Eigen::VectorXcd out(in.size());
    Eigen::FFT<double> fft;
    fft.fwd(out, in);
    return out;
}

Vector dft_magnitude(const Vector& x) {
    return dft_forward(x).cwiseAbs();
}

Vector fft_shift(const Vector& spectrum) {
    const Index n = spectrum.size();
    const Index half = n / 2;
    Vector out(n);
    // Bin 0 moves to index half; bin k to (k + half) mod n.
    for (Index k = 0; k < n; ++k) out((k + half) % n) = spectrum(k);
    return out;
}

} // namespace uwbdar
