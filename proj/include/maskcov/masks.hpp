#pragma once

// Mask matrices and their complexity metrics.

#include "maskcov/matrix_core.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace maskcov {

enum class MaskKind { banded, all_ones, tapered, custom };

std::string_view to_string(MaskKind kind);
MaskKind mask_kind_from_string(std::string_view name);

/// A fixed symmetric weighting matrix applied entrywise to a covariance estimate.
///
/// Built-in kinds (banded, all_ones, tapered) have entries in [0, 1]. Custom
/// masks may hold any real entries; values outside [0, 1] are recorded in
/// `warnings` rather than rejected.
struct Mask {
    SymMatrix matrix;
    MaskKind kind = MaskKind::custom;
    std::optional<int> bandwidth;
    std::vector<std::string> warnings;

    std::size_t dim() const { return matrix.dim(); }
};

/// Local and global mask complexity: max squared column norm and spectral norm.
struct MaskComplexity {
    double col_norm_sq = 0.0;
    double spec_norm = 0.0;
};

/// 0-1 mask with m_ij = 1 iff |i - j| <= (B - 1) / 2. B must be odd, B <= 2p - 1.
Mask banded_mask(std::size_t p, int bandwidth);

Mask all_ones_mask(std::size_t p);

/// Linear taper m_ij = max(0, 1 - |i - j| / ((B + 1) / 2)). Same domain as banded_mask.
Mask tapered_mask(std::size_t p, int bandwidth);

/// Wraps an arbitrary symmetric matrix as a custom mask.
Mask custom_mask(SymMatrix matrix);

MaskComplexity mask_complexity(const Mask& m);

/// Reads the dense matrix format and tags the result as custom.
Mask load_mask(const std::string& path);

}  // namespace maskcov
