#include "maskcov/masks.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace maskcov {

namespace {

constexpr double kRangeSlack = 1e-12;

void check_bandwidth(std::size_t p, int bandwidth, const char* what) {
    if (p < 1) throw std::invalid_argument(std::string(what) + ": p must be positive");
    if (bandwidth < 1 || bandwidth % 2 == 0) {
        throw std::invalid_argument(std::string(what) + ": bandwidth must be a positive odd integer, got " +
                                    std::to_string(bandwidth));
    }
    if (static_cast<long long>(bandwidth) > 2 * static_cast<long long>(p) - 1) {
        std::ostringstream msg;
        msg << what << ": bandwidth " << bandwidth << " exceeds 2p - 1 = " << 2 * p - 1;
        throw std::invalid_argument(msg.str());
    }
}

template <typename EntryFn>
SymMatrix toeplitz(std::size_t p, EntryFn entry) {
    const auto n = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = entry(std::abs(i - j));
    return trusted_symmetric(std::move(m));
}

}  // namespace

std::string_view to_string(MaskKind kind) {
    switch (kind) {
        case MaskKind::banded: return "banded";
        case MaskKind::all_ones: return "all_ones";
        case MaskKind::tapered: return "tapered";
        case MaskKind::custom: return "custom";
    }
    return "custom";
}

MaskKind mask_kind_from_string(std::string_view name) {
    if (name == "banded") return MaskKind::banded;
    if (name == "all_ones") return MaskKind::all_ones;
    if (name == "tapered") return MaskKind::tapered;
    if (name == "custom") return MaskKind::custom;
    throw std::invalid_argument("unknown mask kind '" + std::string(name) + "'");
}

Mask banded_mask(std::size_t p, int bandwidth) {
    check_bandwidth(p, bandwidth, "banded_mask");
    const long half = (bandwidth - 1) / 2;
    Mask m;
    m.matrix = toeplitz(p, [half](long d) { return d <= half ? 1.0 : 0.0; });
    m.kind = MaskKind::banded;
    m.bandwidth = bandwidth;
    return m;
}

Mask all_ones_mask(std::size_t p) {
    if (p < 1) throw std::invalid_argument("all_ones_mask: p must be positive");
    Mask m;
    m.matrix = SymMatrix::ones(p);
    m.kind = MaskKind::all_ones;
    return m;
}

Mask tapered_mask(std::size_t p, int bandwidth) {
    check_bandwidth(p, bandwidth, "tapered_mask");
    const double width = (bandwidth + 1) / 2.0;
    Mask m;
    m.matrix = toeplitz(p, [width](long d) { return std::max(0.0, 1.0 - static_cast<double>(d) / width); });
    m.kind = MaskKind::tapered;
    m.bandwidth = bandwidth;
    return m;
}

Mask custom_mask(SymMatrix matrix) {
    Mask m;
    m.matrix = std::move(matrix);
    m.kind = MaskKind::custom;
    const auto& a = m.matrix.matrix();
    const double lo = a.minCoeff();
    const double hi = a.maxCoeff();
    if (lo < -kRangeSlack || hi > 1.0 + kRangeSlack) {
        std::ostringstream msg;
        msg << "mask entries outside [0, 1] (min " << lo << ", max " << hi << ")";
        m.warnings.push_back(msg.str());
    }
    return m;
}

MaskComplexity mask_complexity(const Mask& m) {
    const double col = one_to_two_norm(m.matrix);
    return {col * col, spectral_norm(m.matrix)};
}

Mask load_mask(const std::string& path) { return custom_mask(read_matrix_file(path)); }

}  // namespace maskcov
