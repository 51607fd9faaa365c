#pragma once

#include "uwbdar/maps.hpp"
#include "uwbdar/types.hpp"

#include <array>
#include <vector>

namespace uwbdar::adapt {

inline constexpr int kGridSide = 14;      // token grid of the pre-trained model
inline constexpr int kOriginalPatch = 16; // pre-trained kernel side
inline constexpr int kImageSide = 224;    // pre-trained input side

/// Geometry mapping an arbitrary input onto a 14x14 token grid: the minimal
/// patch side k with 14*k >= max(rows, cols), and the square side 14*k the
/// input is stretched to.
struct PatchPlan {
    int k = 0;
    int side_extended = 0;
    int num_patches_per_side = kGridSide;
    Index src_rows = 0;
    Index src_cols = 0;
};

PatchPlan compute_patch_plan(Index rows, Index cols);

/// Stretch the input to side_extended x side_extended with corner-aligned
/// bilinear resampling. Both scale factors are >= 1 by construction, so the
/// resample never discards samples.
Matrix extend_and_resize(const Matrix& map_data, const PatchPlan& plan);
Matrix extend_and_resize(const maps::DomainMap& map, const PatchPlan& plan);

enum class Provenance : int { Pretrained16 = 0, Adapted = 1 };

/// One embedding dimension's projection kernel.
struct ProjectionKernel {
    Matrix weights; // k x k
    double bias = 0.0;
    int k = 0;
    Provenance provenance = Provenance::Pretrained16;
};

/// Element-wise mean of a 3-channel 16x16 kernel into one channel.
Matrix average_kernel_channels(const std::array<Matrix, 3>& rgb_kernel);

/// Rescale a 16x16 kernel to k x k: verbatim at k=16, corner-aligned bilinear
/// interpolation when growing, exact-coverage average pooling when shrinking
/// (which preserves the global weight mean).
ProjectionKernel adapt_kernel(const ProjectionKernel& kernel16, int k);

/// Stacked per-dimension kernels: row m of `weights` is kernel m flattened
/// row-major (d x side_r*side_c).
struct ProjectionStack {
    Matrix weights;
    Vector bias;
    Index rows = 0; // patch rows
    Index cols = 0; // patch cols
    Index dim() const { return weights.rows(); }
};

/// Apply adapt_kernel to every dimension of a 16x16 stack.
ProjectionStack adapt_stack(const ProjectionStack& stack16, int k);

/// Anisotropic variant for rectangular patches (per-axis interpolation or
/// pooling).
ProjectionStack adapt_stack_rect(const ProjectionStack& stack16, Index patch_rows,
                                 Index patch_cols);

/// The pre-trained positional-embedding grid: one d-vector per 14x14 cell
/// plus the class-token vector.
struct PevGrid {
    Matrix grid;            // (side_rows*side_cols) x d, row-major over the grid
    Vector class_token_pev; // d
    int d = 0;
    int side_rows = kGridSide;
    int side_cols = kGridSide;

    void validate() const;
};

/// Token sequence fed to the encoder; row 0 is the class token.
struct TokenSequence {
    Matrix tokens; // (1 + grid tokens) x d
    PatchPlan plan;
};

/// Cut `image` into a grid of (patch_rows x patch_cols) patches (row-major)
/// and flatten each patch row-major into a row of the result.
Matrix extract_patches(const Matrix& image, Index patch_rows, Index patch_cols);

/// Project non-overlapping patches, add positional embeddings and prepend the
/// class token. `image` must be square with side grid*stack.rows.
TokenSequence patch_embed(const Matrix& image, const ProjectionStack& stack, const PevGrid& pev,
                          const Vector& class_token, const PatchPlan& plan);

/// Plain bilinear up/down-sampling to 224x224 (lossy when a side exceeds 224).
Matrix baseline_simple_resize(const Matrix& map_data);
Matrix baseline_simple_resize(const maps::DomainMap& map);

/// Keep the input, change the patch shape: rectangular ceil(rows/14) x
/// ceil(cols/14) patches over the zero-padded input, kernels resized
/// anisotropically, pre-trained PEVs attached unchanged.
TokenSequence baseline_adjust_patch_shape(const Matrix& map_data, const ProjectionStack& stack16,
                                          const PevGrid& pev, const Vector& class_token);

/// Truncate (shrinking) or linearly interpolate (growing) the 14x14 PEV grid
/// to grid_rows x grid_cols, per axis. The class-token PEV is kept fixed.
PevGrid manipulate_pev_grid(const PevGrid& pev, Index grid_rows, Index grid_cols);

/// Keep 16x16 patches over the raw (zero-padded) input and reshape the PEV
/// grid to fit: ceil(rows/16) x ceil(cols/16) tokens.
TokenSequence baseline_manipulate_pev(const Matrix& map_data, const ProjectionStack& stack16,
                                      const PevGrid& pev, const Vector& class_token);

} // namespace uwbdar::adapt
