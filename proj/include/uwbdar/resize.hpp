#pragma once

#include "uwbdar/types.hpp"

namespace uwbdar {

/// Corner-aligned linear resample along the row axis: output row i samples
/// the input at i * (in_rows - 1) / (out_rows - 1). Exact copy when sizes match.
Matrix resize_rows_linear(const Matrix& in, Index out_rows);

/// Same along the column axis.
Matrix resize_cols_linear(const Matrix& in, Index out_cols);

/// Separable corner-aligned bilinear resize (rows pass, then columns).
Matrix bilinear_resize(const Matrix& in, Index out_rows, Index out_cols);

/// Exact-coverage average pooling along the row axis: output cell i averages
/// the fractional span [i*in/out, (i+1)*in/out). Every cell covers the same
/// length, the spans tile the input, so the global mean is preserved.
Matrix area_pool_rows(const Matrix& in, Index out_rows);

Matrix area_pool_cols(const Matrix& in, Index out_cols);

Matrix area_pool(const Matrix& in, Index out_rows, Index out_cols);

/// Per-axis kernel rescale: linear interpolation when growing, exact-coverage
/// pooling when shrinking, verbatim copy when equal. Axes are independent so
/// rectangular targets are allowed.
Matrix resize_kernel_grid(const Matrix& in, Index out_rows, Index out_cols);

/// Zero-pad to (rows, cols); the input sits at the top-left corner.
Matrix zero_pad(const Matrix& in, Index rows, Index cols);

} // namespace uwbdar
