#include "uwbdar/resize.hpp"

#include <algorithm>
#include <cmath>

namespace uwbdar {

namespace {

void check_positive(Index out_rows, Index out_cols) {
    if (out_rows < 1 || out_cols < 1)
        throw std::invalid_argument("resize: output dimensions must be >= 1");
}

} // namespace

Matrix resize_rows_linear(const Matrix& in, Index out_rows) {
    check_positive(out_rows, 1);
    const Index n = in.rows();
    if (n == out_rows) return in;
    Matrix out(out_rows, in.cols());
    if (n == 1) {
        out.rowwise() = in.row(0);
        return out;
    }
    const double scale = static_cast<double>(n - 1) / static_cast<double>(out_rows - 1);
    for (Index i = 0; i < out_rows; ++i) {
        const double pos = (out_rows == 1) ? 0.0 : static_cast<double>(i) * scale;
        Index lo = static_cast<Index>(std::floor(pos));
        if (lo >= n - 1) lo = n - 2;
        const double w = pos - static_cast<double>(lo);
        out.row(i) = (1.0 - w) * in.row(lo) + w * in.row(lo + 1);
    }
    return out;
}

Matrix resize_cols_linear(const Matrix& in, Index out_cols) {
    return resize_rows_linear(in.transpose(), out_cols).transpose();
}

Matrix bilinear_resize(const Matrix& in, Index out_rows, Index out_cols) {
    check_positive(out_rows, out_cols);
    if (in.size() == 0) throw std::invalid_argument("resize: empty input");
    return resize_cols_linear(resize_rows_linear(in, out_rows), out_cols);
}

Matrix area_pool_rows(const Matrix& in, Index out_rows) {
    check_positive(out_rows, 1);
    const Index n = in.rows();
    if (n == out_rows) return in;
    // Each output cell covers exactly span = n / out_rows input rows, with
    // fractional weights at the cell boundaries.
    const double span = static_cast<double>(n) / static_cast<double>(out_rows);
    Matrix out = Matrix::Zero(out_rows, in.cols());
    for (Index i = 0; i < out_rows; ++i) {
        const double lo = static_cast<double>(i) * span;
        const double hi = static_cast<double>(i + 1) * span;
        const Index first = static_cast<Index>(std::floor(lo));
        const Index last = std::min<Index>(n - 1, static_cast<Index>(std::ceil(hi)) - 1);
        for (Index r = first; r <= last; ++r) {
            const double cover = std::min(hi, static_cast<double>(r + 1)) -
                                 std::max(lo, static_cast<double>(r));
            if (cover > 0.0) out.row(i) += cover * in.row(r);
        }
        out.row(i) /= span;
    }
    return out;
}

Matrix area_pool_cols(const Matrix& in, Index out_cols) {
    return area_pool_rows(in.transpose(), out_cols).transpose();
}

Matrix area_pool(const Matrix& in, Index out_rows, Index out_cols) {
    return area_pool_cols(area_pool_rows(in, out_rows), out_cols);
}

Matrix resize_kernel_grid(const Matrix& in, Index out_rows, Index out_cols) {
    check_positive(out_rows, out_cols);
    Matrix mid = (out_rows > in.rows())   ? resize_rows_linear(in, out_rows)
                 : (out_rows < in.rows()) ? area_pool_rows(in, out_rows)
                                          : in;
    return (out_cols > mid.cols())   ? resize_cols_linear(mid, out_cols)
           : (out_cols < mid.cols()) ? area_pool_cols(mid, out_cols)
                                     : mid;
}

Matrix zero_pad(const Matrix& in, Index rows, Index cols) {
    if (rows < in.rows() || cols < in.cols())
        throw std::invalid_argument("zero_pad: target smaller than input");
    Matrix out = Matrix::Zero(rows, cols);
    out.topLeftCorner(in.rows(), in.cols()) = in;
    return out;
}

} // namespace uwbdar
