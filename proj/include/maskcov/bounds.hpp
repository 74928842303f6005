#pragma once

// Closed-form error bounds and sample-complexity formulas. All logs are natural.

#include "maskcov/masks.hpp"
#include "maskcov/matrix_core.hpp"
#include "maskcov/models.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace maskcov {

/// An evaluated two-term bound: a moderate-deviation term plus a large-deviation term.
struct BoundReport {
    std::string formula;
    double moderate_term = 0.0;
    double large_dev_term = 0.0;
    double total = 0.0;
    std::map<std::string, double> inputs;
};

/// Ceiling of a two-term sample-complexity expression.
struct SampleComplexity {
    std::string formula;
    double first_term = 0.0;
    double second_term = 0.0;
    double value = 0.0;
    std::uint64_t samples = 0;
};

/// Bound on the root-mean-square variance term of the masked estimator for any
/// zero-mean distribution with four moments:
///
///   sqrt(8e log p / n) * ||M||_{1->2} * mu_4 * nu
///     + (8e log p / n) * ||M|| * [E max_k ||x_k||_inf^4]^{1/2}
///
/// `cp` must contain mu_4. Requires p >= 3 and n >= 1.
BoundReport main_bound(const MaskComplexity& mc, const ConcentrationParams& cp, double emax_sq_root,
                       std::size_t n, std::size_t p);

/// {1, 1.25, 1.5, 2, 3, 4, 6, 8}
std::vector<double> default_r_grid();

/// Moment of order q -> mu_q.
using MomentFn = std::function<double(double)>;

/// min over r of (np)^{1/(2r)} * mu_{4r}^2, bounding [E max_k ||x_k||_inf^4]^{1/2}.
/// The grid is extended with r = 1 and, when it is >= 1, r = log(np) / 2.
double expected_max_bound(std::size_t n, std::size_t p, const MomentFn& mu_fn,
                          std::span<const double> r_grid);

/// Gaussian variance bound.
///
/// explicit_constants = true: the certified route, main_bound fed with
/// mu_4 <= sqrt(2 ||Sigma||_max), nu = 3^{1/4} ||Sigma||^{1/2} and the expected-max
/// bound over the default grid (equal to e log(np) ||Sigma||_max once np >= e^2).
///
/// explicit_constants = false: c * [ (rho ||M||_{1->2}^2 log p / n)^{1/2}
///   + rho ||M|| log p log(np) / n ] * ||Sigma||, rho = ||Sigma||_max / ||Sigma||,
/// where c is an unspecified absolute constant supplied by the caller.
BoundReport gaussian_bound(const Mask& mask, const SymMatrix& sigma, std::size_t n,
                           bool explicit_constants, double c = 1.0);

/// ceil(c * (||M||_{1->2}^2 log p / eps^2 + ||M|| log^2 p / eps) * ratio)
SampleComplexity sample_complexity_masked(const MaskComplexity& mc, double p, double ratio,
                                          double eps, double c = 1.0);
/// Same, with p and ratio = ||Sigma||_max / ||Sigma|| taken from Sigma.
SampleComplexity sample_complexity_masked(const Mask& mask, const SymMatrix& sigma, double eps,
                                          double c = 1.0);

/// ceil(c * (B log p / eps^2 + B log^2 p / eps) * ratio)
SampleComplexity sample_complexity_banded(double bandwidth, double p, double ratio, double eps,
                                          double c = 1.0);

/// Earlier log^5 / log^3 bound: ceil(c * (||M||_{1->2}^2 log^5 p / eps^2 + ||M|| log^3 p / eps)).
SampleComplexity sample_complexity_lv(const MaskComplexity& mc, double p, double eps, double c = 1.0);
SampleComplexity sample_complexity_lv(const Mask& mask, double eps, double c = 1.0);

/// ceil(c * p / eps^2)
SampleComplexity sample_complexity_classical(double p, double eps, double c = 1.0);

struct BandedBias {
    double bias_bound = 0.0;        // 2 / (alpha - 1) * (b + 1)^{1 - alpha}
    double sigma_norm_bound = 0.0;  // 1 + 2 / (alpha - 1)
};

/// Bias of a half-bandwidth-b banded mask on a covariance with |sigma_ij| <= (|i-j|+1)^-alpha.
BandedBias banded_bias_bound(double alpha, int b);

/// Smallest admissible moment-inequality order: max(q, 2 log p).
double moment_order(double q, std::size_t p);

/// PSD summands: [mean_norm^{1/2} + 2 sqrt(e r) max_term^{1/(2q)}]^2, with
/// mean_norm = ||sum_i E W_i|| and max_term = E max_i ||W_i||^q. Needs q >= 1, r >= q.
double moment_bound_psd(double mean_norm, double max_term, double q, double r);

/// Symmetric summands: sqrt(e r) variance_norm + 2 e r max_term^{1/q}, with
/// variance_norm = ||(sum_i E Y_i^2)^{1/2}|| and max_term = E max_i ||Y_i||^q.
/// Needs q >= 2, r >= q.
double moment_bound_selfadj(double variance_norm, double max_term, double q, double r);

/// sqrt(r) * || (sum_i A_i^2)^{1/2} ||_r, for r >= 2.
double khintchine_rhs(std::span<const SymMatrix> matrices, double r);

}  // namespace maskcov
