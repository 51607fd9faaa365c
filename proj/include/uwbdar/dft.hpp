#pragma once

#include "uwbdar/types.hpp"

#include <complex>

namespace uwbdar {

/// Unnormalized forward DFT of a real vector, full N-point spectrum.
/// Handles arbitrary lengths (mixed-radix under the hood).
Eigen::VectorXcd dft_forward(const Vector& x);

/// Magnitude of the forward DFT.
Vector dft_magnitude(const Vector& x);

/// Rotate a spectrum so the zero-frequency bin lands at index floor(n/2).
Vector fft_shift(const Vector& spectrum);

} // namespace uwbdar
