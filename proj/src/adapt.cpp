#include "uwbdar/adapt.hpp"

#include "uwbdar/resize.hpp"

#include <cmath>

namespace uwbdar::adapt {

PatchPlan compute_patch_plan(Index rows, Index cols) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("compute_patch_plan: dimensions must be >= 1");
    PatchPlan plan;
    const Index longer = std::max(rows, cols);
    plan.k = static_cast<int>((longer + kGridSide - 1) / kGridSide);
    plan.side_extended = kGridSide * plan.k;
    plan.src_rows = rows;
    plan.src_cols = cols;
    return plan;
}

Matrix extend_and_resize(const Matrix& map_data, const PatchPlan& plan) {
    if (map_data.rows() != plan.src_rows || map_data.cols() != plan.src_cols)
        throw std::invalid_argument("extend_and_resize: plan does not match input shape");
    return bilinear_resize(map_data, plan.side_extended, plan.side_extended);
}

Matrix extend_and_resize(const maps::DomainMap& map, const PatchPlan& plan) {
    return extend_and_resize(map.data, plan);
}

Matrix average_kernel_channels(const std::array<Matrix, 3>& rgb_kernel) {
    for (const auto& ch : rgb_kernel)
        if (ch.rows() != kOriginalPatch || ch.cols() != kOriginalPatch)
            throw std::invalid_argument("average_kernel_channels: channels must be 16x16");
    return (rgb_kernel[0] + rgb_kernel[1] + rgb_kernel[2]) / 3.0;
}

ProjectionKernel adapt_kernel(const ProjectionKernel& kernel16, int k) {
    if (k < 1) throw std::invalid_argument("adapt_kernel: k must be >= 1");
    if (kernel16.weights.rows() != kOriginalPatch || kernel16.weights.cols() != kOriginalPatch)
        throw std::invalid_argument("adapt_kernel: source kernel must be 16x16");
    ProjectionKernel out;
    out.k = k;
    out.bias = kernel16.bias;
    out.provenance = (k == kOriginalPatch) ? kernel16.provenance : Provenance::Adapted;
    if (k == kOriginalPatch)
        out.weights = kernel16.weights;
    else if (k > kOriginalPatch)
        out.weights = bilinear_resize(kernel16.weights, k, k);
    else
        out.weights = area_pool(kernel16.weights, k, k);
    return out;
}

ProjectionStack adapt_stack(const ProjectionStack& stack16, int k) {
    if (stack16.rows != kOriginalPatch || stack16.cols != kOriginalPatch)
        throw std::invalid_argument("adapt_stack: source stack must be 16x16");
    ProjectionStack out;
    out.rows = k;
    out.cols = k;
    out.bias = stack16.bias;
    out.weights.resize(stack16.dim(), static_cast<Index>(k) * k);
    for (Index m = 0; m < stack16.dim(); ++m) {
        // reshaped() mishandles strided row views, so materialize first
        const Matrix flat = stack16.weights.row(m);
        ProjectionKernel src;
        src.k = kOriginalPatch;
        src.weights = flat.reshaped<Eigen::RowMajor>(kOriginalPatch, kOriginalPatch);
        ProjectionKernel dst = adapt_kernel(src, k);
        out.weights.row(m) = dst.weights.reshaped<Eigen::RowMajor>(1, static_cast<Index>(k) * k);
    }
    return out;
}

ProjectionStack adapt_stack_rect(const ProjectionStack& stack16, Index patch_rows,
                                 Index patch_cols) {
    if (stack16.rows != kOriginalPatch || stack16.cols != kOriginalPatch)
        throw std::invalid_argument("adapt_stack_rect: source stack must be 16x16");
    if (patch_rows < 1 || patch_cols < 1)
        throw std::invalid_argument("adapt_stack_rect: patch dims must be >= 1");
    ProjectionStack out;
    out.rows = patch_rows;
    out.cols = patch_cols;
    out.bias = stack16.bias;
    out.weights.resize(stack16.dim(), patch_rows * patch_cols);
    for (Index m = 0; m < stack16.dim(); ++m) {
        const Matrix flat = stack16.weights.row(m);
        Matrix k16 = flat.reshaped<Eigen::RowMajor>(kOriginalPatch, kOriginalPatch);
        Matrix kr = resize_kernel_grid(k16, patch_rows, patch_cols);
        out.weights.row(m) = kr.reshaped<Eigen::RowMajor>(1, patch_rows * patch_cols);
    }
    return out;
}

void PevGrid::validate() const {
    if (grid.rows() != static_cast<Index>(side_rows) * side_cols || grid.cols() != d ||
        class_token_pev.size() != d)
        throw std::invalid_argument("PevGrid: inconsistent dimensions");
    if (!grid.allFinite() || !class_token_pev.allFinite())
        throw std::invalid_argument("PevGrid: non-finite values");
}

Matrix extract_patches(const Matrix& image, Index patch_rows, Index patch_cols) {
    if (patch_rows < 1 || patch_cols < 1 || image.rows() % patch_rows != 0 ||
        image.cols() % patch_cols != 0)
        throw std::invalid_argument("extract_patches: image not divisible into patches");
    const Index grid_r = image.rows() / patch_rows;
    const Index grid_c = image.cols() / patch_cols;
    Matrix out(grid_r * grid_c, patch_rows * patch_cols);
    for (Index gi = 0; gi < grid_r; ++gi)
        for (Index gj = 0; gj < grid_c; ++gj)
            out.row(gi * grid_c + gj) =
                image.block(gi * patch_rows, gj * patch_cols, patch_rows, patch_cols)
                    .reshaped<Eigen::RowMajor>(1, patch_rows * patch_cols);
    return out;
}

namespace {

TokenSequence assemble_tokens(const Matrix& patches, const ProjectionStack& stack,
                              const PevGrid& pev, const Vector& class_token,
                              const PatchPlan& plan) {
    pev.validate();
    if (stack.dim() != pev.d || class_token.size() != pev.d)
        throw std::invalid_argument("patch_embed: embedding dimension mismatch");
    if (patches.rows() != pev.grid.rows())
        throw std::invalid_argument("patch_embed: token count does not match PEV grid");
    TokenSequence seq;
    seq.plan = plan;
    seq.tokens.resize(patches.rows() + 1, pev.d);
    seq.tokens.row(0) = (class_token + pev.class_token_pev).transpose();
    seq.tokens.bottomRows(patches.rows()).noalias() = patches * stack.weights.transpose();
    seq.tokens.bottomRows(patches.rows()).rowwise() += stack.bias.transpose();
    seq.tokens.bottomRows(patches.rows()) += pev.grid;
    return seq;
}

} // namespace

TokenSequence patch_embed(const Matrix& image, const ProjectionStack& stack, const PevGrid& pev,
                          const Vector& class_token, const PatchPlan& plan) {
    if (stack.rows != stack.cols || stack.rows != plan.k)
        throw std::invalid_argument("patch_embed: stack patch size does not match plan");
    if (image.rows() != plan.side_extended || image.cols() != plan.side_extended)
        throw std::invalid_argument("patch_embed: image side must be 14*k");
    Matrix patches = extract_patches(image, plan.k, plan.k);
    return assemble_tokens(patches, stack, pev, class_token, plan);
}

Matrix baseline_simple_resize(const Matrix& map_data) {
    return bilinear_resize(map_data, kImageSide, kImageSide);
}

Matrix baseline_simple_resize(const maps::DomainMap& map) {
    return baseline_simple_resize(map.data);
}

TokenSequence baseline_adjust_patch_shape(const Matrix& map_data, const ProjectionStack& stack16,
                                          const PevGrid& pev, const Vector& class_token) {
    const Index ph = (map_data.rows() + kGridSide - 1) / kGridSide;
    const Index pw = (map_data.cols() + kGridSide - 1) / kGridSide;
    Matrix padded = zero_pad(map_data, kGridSide * ph, kGridSide * pw);
    ProjectionStack stack = adapt_stack_rect(stack16, ph, pw);
    Matrix patches = extract_patches(padded, ph, pw);
    PatchPlan plan;
    plan.k = 0;
    plan.side_extended = 0;
    plan.src_rows = map_data.rows();
    plan.src_cols = map_data.cols();
    return assemble_tokens(patches, stack, pev, class_token, plan);
}

PevGrid manipulate_pev_grid(const PevGrid& pev, Index grid_rows, Index grid_cols) {
    pev.validate();
    if (grid_rows < 1 || grid_cols < 1)
        throw std::invalid_argument("manipulate_pev_grid: grid dims must be >= 1");
    PevGrid out;
    out.d = pev.d;
    out.side_rows = static_cast<int>(grid_rows);
    out.side_cols = static_cast<int>(grid_cols);
    out.class_token_pev = pev.class_token_pev;
    out.grid.resize(grid_rows * grid_cols, pev.d);
    // Treat each embedding dimension as a 14x14 image: truncate on a shrinking
    // axis, linearly interpolate on a growing one.
    for (Index m = 0; m < pev.d; ++m) {
        Matrix g = pev.grid.col(m).reshaped<Eigen::RowMajor>(pev.side_rows, pev.side_cols);
        Matrix rows_done = (grid_rows <= pev.side_rows) ? Matrix(g.topRows(grid_rows))
                                                        : resize_rows_linear(g, grid_rows);
        Matrix done = (grid_cols <= pev.side_cols) ? Matrix(rows_done.leftCols(grid_cols))
                                                   : resize_cols_linear(rows_done, grid_cols);
        out.grid.col(m) = done.reshaped<Eigen::RowMajor>(grid_rows * grid_cols, 1);
    }
    return out;
}

TokenSequence baseline_manipulate_pev(const Matrix& map_data, const ProjectionStack& stack16,
                                      const PevGrid& pev, const Vector& class_token) {
    const Index gh = (map_data.rows() + kOriginalPatch - 1) / kOriginalPatch;
    const Index gw = (map_data.cols() + kOriginalPatch - 1) / kOriginalPatch;
    Matrix padded = zero_pad(map_data, gh * kOriginalPatch, gw * kOriginalPatch);
    Matrix patches = extract_patches(padded, kOriginalPatch, kOriginalPatch);
    PevGrid manipulated = manipulate_pev_grid(pev, gh, gw);
    PatchPlan plan;
    plan.k = kOriginalPatch;
    plan.side_extended = 0;
    plan.src_rows = map_data.rows();
    plan.src_cols = map_data.cols();
    return assemble_tokens(patches, stack16, manipulated, class_token, plan);
}

} // namespace uwbdar::adapt
