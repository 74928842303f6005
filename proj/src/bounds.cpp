#include "maskcov/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace maskcov {

namespace {

constexpr double kE = std::numbers::e;

void require_dimension_at_least_three(double p, const char* what) {
    if (!(p >= 3.0)) throw std::invalid_argument(std::string(what) + ": requires p >= 3");
}

void require_positive_eps(double eps, const char* what) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw std::invalid_argument(std::string(what) + ": eps must be a positive real");
    }
}

void require_nonneg_constant(double c, const char* what) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
        throw std::invalid_argument(std::string(what) + ": constant c must be >= 0");
    }
}

std::uint64_t ceil_count(double value) {
    if (!(value >= 0.0) || !std::isfinite(value) ||
        value >= static_cast<double>(std::numeric_limits<std::uint64_t>::max())) {
        throw std::overflow_error("sample complexity is not representable as a 64-bit count");
    }
    return static_cast<std::uint64_t>(std::ceil(value));
}

SampleComplexity make_complexity(std::string formula, double first, double second) {
    SampleComplexity out;
    out.formula = std::move(formula);
    out.first_term = first;
    out.second_term = second;
    out.value = first + second;
    out.samples = ceil_count(out.value);
    return out;
}

}  // namespace

BoundReport main_bound(const MaskComplexity& mc, const ConcentrationParams& cp, double emax_sq_root,
                       std::size_t n, std::size_t p) {
    require_dimension_at_least_three(static_cast<double>(p), "main_bound");
    if (n < 1) throw std::invalid_argument("main_bound: n must be >= 1");
    if (!(emax_sq_root >= 0.0)) throw std::invalid_argument("main_bound: expected maximum must be >= 0");
    const double mu4 = cp.mu_at(4.0);
    const double scale = 8.0 * kE * std::log(static_cast<double>(p)) / static_cast<double>(n);

    BoundReport out;
    out.formula = "main";
    out.moderate_term = std::sqrt(scale) * std::sqrt(mc.col_norm_sq) * mu4 * cp.nu;
    out.large_dev_term = scale * mc.spec_norm * emax_sq_root;
    out.total = out.moderate_term + out.large_dev_term;
    out.inputs = {{"n", static_cast<double>(n)},      {"p", static_cast<double>(p)},
                  {"col_norm_sq", mc.col_norm_sq},    {"spec_norm", mc.spec_norm},
                  {"mu4", mu4},                       {"nu", cp.nu},
                  {"emax_sq_root", emax_sq_root}};
    return out;
}

std::vector<double> default_r_grid() { return {1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0}; }

double expected_max_bound(std::size_t n, std::size_t p, const MomentFn& mu_fn,
                          std::span<const double> r_grid) {
    if (n < 1 || p < 1) throw std::invalid_argument("expected_max_bound: n and p must be >= 1");
    const double log_np = std::log(static_cast<double>(n) * static_cast<double>(p));
    std::vector<double> grid(r_grid.begin(), r_grid.end());
    grid.push_back(1.0);
    if (log_np / 2.0 >= 1.0) grid.push_back(log_np / 2.0);

    double best = std::numeric_limits<double>::infinity();
    for (double r : grid) {
        if (!(r >= 1.0) || !std::isfinite(r)) {
            throw std::invalid_argument("expected_max_bound: grid orders must be finite and >= 1");
        }
        const double mu = mu_fn(4.0 * r);
        best = std::min(best, std::exp(log_np / (2.0 * r)) * mu * mu);
    }
    return best;
}

BoundReport gaussian_bound(const Mask& mask, const SymMatrix& sigma, std::size_t n,
                           bool explicit_constants, double c) {
    const std::size_t p = sigma.dim();
    require_dimension_at_least_three(static_cast<double>(p), "gaussian_bound");
    if (mask.dim() != p) throw std::invalid_argument("gaussian_bound: mask and Sigma dimensions differ");
    if (n < 1) throw std::invalid_argument("gaussian_bound: n must be >= 1");
    require_nonneg_constant(c, "gaussian_bound");

    const MaskComplexity mc = mask_complexity(mask);
    const double sigma_max = max_norm(sigma);
    const double sigma_norm = spectral_norm(sigma);

    if (explicit_constants) {
        const double orders[] = {4.0};
        const ConcentrationParams cp = gaussian_params(sigma, orders, /*exact=*/false);
        const auto grid = default_r_grid();
        const double emax = expected_max_bound(
            n, p, [&sigma](double order) { return gaussian_mu(sigma, order / 2.0); }, grid);
        BoundReport out = main_bound(mc, cp, emax, n, p);
        out.formula = "gaussian_explicit";
        out.inputs["sigma_max"] = sigma_max;
        out.inputs["sigma_norm"] = sigma_norm;
        return out;
    }

    if (sigma_norm == 0.0) throw std::invalid_argument("gaussian_bound: Sigma has zero spectral norm");
    const double logp = std::log(static_cast<double>(p));
    const double log_np = std::log(static_cast<double>(n) * static_cast<double>(p));
    const double ratio = sigma_max / sigma_norm;
    const double nd = static_cast<double>(n);

    BoundReport out;
    out.formula = "gaussian_shape";
    out.moderate_term = c * std::sqrt(ratio * mc.col_norm_sq * logp / nd) * sigma_norm;
    out.large_dev_term = c * ratio * mc.spec_norm * logp * log_np / nd * sigma_norm;
    out.total = out.moderate_term + out.large_dev_term;
    out.inputs = {{"n", nd},
                  {"p", static_cast<double>(p)},
                  {"col_norm_sq", mc.col_norm_sq},
                  {"spec_norm", mc.spec_norm},
                  {"sigma_max", sigma_max},
                  {"sigma_norm", sigma_norm},
                  {"c", c}};
    return out;
}

SampleComplexity sample_complexity_masked(const MaskComplexity& mc, double p, double ratio,
                                          double eps, double c) {
    require_positive_eps(eps, "sample_complexity_masked");
    require_nonneg_constant(c, "sample_complexity_masked");
    if (!(p >= 1.0)) throw std::invalid_argument("sample_complexity_masked: p must be >= 1");
    if (!(ratio >= 0.0)) throw std::invalid_argument("sample_complexity_masked: ratio must be >= 0");
    const double logp = std::log(p);
    return make_complexity("complexity-masked", c * mc.col_norm_sq * logp / (eps * eps) * ratio,
                           c * mc.spec_norm * logp * logp / eps * ratio);
}

SampleComplexity sample_complexity_masked(const Mask& mask, const SymMatrix& sigma, double eps,
                                          double c) {
    if (mask.dim() != sigma.dim()) {
        throw std::invalid_argument("sample_complexity_masked: mask and Sigma dimensions differ");
    }
    const double sigma_norm = spectral_norm(sigma);
    if (sigma_norm == 0.0) throw std::invalid_argument("sample_complexity_masked: Sigma is zero");
    return sample_complexity_masked(mask_complexity(mask), static_cast<double>(sigma.dim()),
                                    max_norm(sigma) / sigma_norm, eps, c);
}

SampleComplexity sample_complexity_banded(double bandwidth, double p, double ratio, double eps, double c) {
    require_positive_eps(eps, "sample_complexity_banded");
    require_nonneg_constant(c, "sample_complexity_banded");
    if (!(bandwidth >= 0.0)) throw std::invalid_argument("sample_complexity_banded: B must be >= 0");
    if (!(p >= 1.0)) throw std::invalid_argument("sample_complexity_banded: p must be >= 1");
    if (!(ratio >= 0.0)) throw std::invalid_argument("sample_complexity_banded: ratio must be >= 0");
    const double logp = std::log(p);
    return make_complexity("complexity-banded", c * bandwidth * logp / (eps * eps) * ratio,
                           c * bandwidth * logp * logp / eps * ratio);
}

SampleComplexity sample_complexity_lv(const MaskComplexity& mc, double p, double eps, double c) {
    require_positive_eps(eps, "sample_complexity_lv");
    require_nonneg_constant(c, "sample_complexity_lv");
    if (!(p >= 1.0)) throw std::invalid_argument("sample_complexity_lv: p must be >= 1");
    const double logp = std::log(p);
    return make_complexity("complexity-lv", c * mc.col_norm_sq * std::pow(logp, 5) / (eps * eps),
                           c * mc.spec_norm * std::pow(logp, 3) / eps);
}

SampleComplexity sample_complexity_lv(const Mask& mask, double eps, double c) {
    return sample_complexity_lv(mask_complexity(mask), static_cast<double>(mask.dim()), eps, c);
}

SampleComplexity sample_complexity_classical(double p, double eps, double c) {
    require_positive_eps(eps, "sample_complexity_classical");
    require_nonneg_constant(c, "sample_complexity_classical");
    if (!(p >= 1.0)) throw std::invalid_argument("sample_complexity_classical: p must be >= 1");
    return make_complexity("classical", c * p / (eps * eps), 0.0);
}

BandedBias banded_bias_bound(double alpha, int b) {
    if (!(alpha > 1.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("banded_bias_bound: alpha must be > 1");
    }
    if (b < 0) throw std::invalid_argument("banded_bias_bound: b must be >= 0");
    return {2.0 / (alpha - 1.0) * std::pow(static_cast<double>(b) + 1.0, 1.0 - alpha),
            1.0 + 2.0 / (alpha - 1.0)};
}

double moment_order(double q, std::size_t p) {
    return std::max(q, 2.0 * std::log(static_cast<double>(p)));
}

double moment_bound_psd(double mean_norm, double max_term, double q, double r) {
    if (!(q >= 1.0)) throw std::invalid_argument("moment_bound_psd: q must be >= 1");
    if (!(r >= q)) throw std::invalid_argument("moment_bound_psd: r must be >= q");
    if (!(mean_norm >= 0.0) || !(max_term >= 0.0)) {
        throw std::invalid_argument("moment_bound_psd: inputs must be nonnegative");
    }
    const double root = std::sqrt(mean_norm) + 2.0 * std::sqrt(kE * r) * std::pow(max_term, 1.0 / (2.0 * q));
    return root * root;
}

double moment_bound_selfadj(double variance_norm, double max_term, double q, double r) {
    if (!(q >= 2.0)) throw std::invalid_argument("moment_bound_selfadj: q must be >= 2");
    if (!(r >= q)) throw std::invalid_argument("moment_bound_selfadj: r must be >= q");
    if (!(variance_norm >= 0.0) || !(max_term >= 0.0)) {
        throw std::invalid_argument("moment_bound_selfadj: inputs must be nonnegative");
    }
    return std::sqrt(kE * r) * variance_norm + 2.0 * kE * r * std::pow(max_term, 1.0 / q);
}

double khintchine_rhs(std::span<const SymMatrix> matrices, double r) {
    if (!(r >= 2.0)) throw std::invalid_argument("khintchine_rhs: r must be >= 2");
    if (matrices.empty()) throw std::invalid_argument("khintchine_rhs: need at least one matrix");
    SymMatrix sum = SymMatrix::zeros(matrices.front().dim());
    for (const auto& a : matrices) sum += square(a);
    return std::sqrt(r) * schatten_norm(psd_sqrt(sum), r);
}

}  // namespace maskcov
