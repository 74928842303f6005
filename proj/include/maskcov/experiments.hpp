#pragma once

// Seeded Monte Carlo experiments and empirical checks of the matrix inequalities.
//
// Every trial draws from its own generator seeded with derive_seed(seed, trial),
// and per-trial results are reduced in trial order, so results do not depend on
// the number of worker threads.

#include "maskcov/bounds.hpp"
#include "maskcov/masks.hpp"
#include "maskcov/models.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace maskcov {

struct ExperimentConfig {
    DistributionSpec model;
    Mask mask;
    std::size_t n = 1;
    std::size_t trials = 100;
    std::uint64_t seed = 1;
    bool centered = false;
    std::optional<double> eps;
    /// 0 selects std::thread::hardware_concurrency().
    unsigned threads = 0;

    /// trials >= 2, n >= 1, p >= 3, mask matches p, eps in (0, 1).
    void validate() const;
};

struct ExperimentResult {
    /// [mean over trials of ||M o S_n - M o Sigma||^2]^{1/2}
    double empirical_rms = 0.0;
    /// Delta-method standard error of empirical_rms.
    double std_error = 0.0;
    BoundReport theoretical;
    /// empirical_rms / theoretical.total, defined as 0 when both vanish.
    double ratio = 0.0;
    /// False when the bound used estimated (diagnostic) concentration parameters.
    bool certified = true;
    std::vector<double> per_trial;
    ExperimentConfig config;
};

/// Gaussian models are compared against the explicit-constant bound. Other
/// families use mu and nu estimated from a separate calibration draw; those
/// reports are flagged `certified = false`.
ExperimentResult run_variance_experiment(const ExperimentConfig& cfg);

enum class Axis { n, bandwidth, p };

std::string_view to_string(Axis axis);
Axis axis_from_string(std::string_view name);

struct ScalingRow {
    double axis_value = 0.0;
    ExperimentResult result;
};

/// One experiment per value along `axis`, all sharing the base seed.
/// The bandwidth and p axes rebuild the mask (banded, tapered, all_ones only).
std::vector<ScalingRow> scaling_study(const ExperimentConfig& base, Axis axis, std::span<const double> values);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(std::span<const double> x, std::span<const double> y);

/// E (M o xx^T)^2 for x ~ N(0, Sigma), from Isserlis' theorem:
/// entry (j, l) = sum_i m_ji m_il (s_ii s_jl + 2 s_ij s_il).
SymMatrix gaussian_schur_second_moment(const SymMatrix& mask, const SymMatrix& sigma);

struct VarianceLemmaReport {
    double lhs_lambda_max = 0.0;  // lambda_max of the Monte Carlo mean of (M o xx^T)^2
    double bound = 0.0;           // mu_4^2 nu^2 ||M||_{1->2}^2
    double max_violation = 0.0;   // lambda_max(mean - bound I)
    double std_error = 0.0;
    bool holds = true;            // max_violation <= 5 standard errors
};

/// Checks E (M o xx^T)^2 <= mu_4^2 nu^2 ||M||_{1->2}^2 I with exact Gaussian mu_4, nu.
VarianceLemmaReport verify_variance_lemma(const DistributionSpec& model, const Mask& mask,
                                          std::size_t trials, std::uint64_t seed, unsigned threads = 0);

struct SchurNormLemmaReport {
    std::size_t draws = 0;
    std::size_t violations = 0;
    double max_ratio = 0.0;  // max ||M o xx^T|| / (||M|| ||x||_inf^2)
    bool holds = true;
};

/// Deterministic inequality ||M o xx^T|| <= ||M|| ||x||_inf^2 on random
/// Gaussian symmetric M and Gaussian x. Only floating-point rounding is tolerated.
SchurNormLemmaReport verify_schur_norm_lemma(std::size_t trials, std::size_t p, std::uint64_t seed,
                                             unsigned threads = 0);

struct ExpectedMaxReport {
    double empirical = 0.0;  // [E max_k ||x_k||_inf^4]^{1/4}
    double bound = 0.0;      // inf_r (np)^{1/(4r)} mu_{4r}
    double ratio = 0.0;
    double std_error = 0.0;
    bool holds = true;       // empirical <= bound + 3 standard errors
};

/// Uses exact Gaussian diagonal moments; the model must be Gaussian.
ExpectedMaxReport verify_expected_max_lemma(const DistributionSpec& model, std::size_t n,
                                            std::size_t trials, std::span<const double> r_grid,
                                            std::uint64_t seed, unsigned threads = 0);

struct SymmetrizationReport {
    double lhs = 0.0;  // E || sum_i (Z_i - E Z_i) ||
    double rhs = 0.0;  // 2 E || sum_i xi_i Z_i ||
    double lhs_se = 0.0;
    double rhs_se = 0.0;
    bool holds = true;  // lhs <= rhs + 3 combined standard errors
};

/// Z_i = M o x_i x_i^T with n samples per trial and fresh Rademacher signs.
SymmetrizationReport verify_symmetrization(const DistributionSpec& model, const Mask& mask, std::size_t n,
                                           std::size_t trials, std::uint64_t seed, unsigned threads = 0);

struct KhintchineReport {
    double lhs = 0.0;  // (E || sum_i xi_i A_i ||_r^r)^{1/r}
    double rhs = 0.0;  // khintchine_rhs
    double std_error = 0.0;
    bool exact = false;
    bool holds = true;
};

/// Exact mode averages over every sign pattern (at most 20 matrices) and
/// compares with no slack. Otherwise `trials` random sign vectors are used and
/// 3 standard errors of slack are allowed.
KhintchineReport verify_khintchine(std::span<const SymMatrix> matrices, double r, std::size_t trials,
                                   std::uint64_t seed, bool exact);

/// k symmetric p x p matrices with independent N(0, 1) entries on and above the diagonal.
std::vector<SymMatrix> random_symmetric_ensemble(std::size_t k, std::size_t p, std::uint64_t seed);

enum class MomentPart { psd, selfadj };

std::string_view to_string(MomentPart part);
MomentPart moment_part_from_string(std::string_view name);

/// Summands built from x ~ N(0, covariance): W_i = mask o x_i x_i^T (psd part,
/// mask must be PSD; mask = ones gives rank-one Wishart terms) or
/// Y_i = xi_i (mask o x_i x_i^T) (selfadj part).
struct MomentEnsemble {
    SymMatrix covariance;
    SymMatrix mask;
    std::size_t summands = 1;
};

struct MomentInequalityReport {
    double lhs = 0.0;          // (E ||sum_i W_i||^q)^{1/q}
    double rhs = 0.0;
    double r = 0.0;            // max(q, 2 log p)
    double first_input = 0.0;  // ||sum E W_i|| (psd) or ||(sum E Y_i^2)^{1/2}|| (selfadj)
    double max_term = 0.0;     // E max_i ||summand_i||^q
    double lhs_se = 0.0;
    double rhs_se = 0.0;
    bool holds = true;         // lhs <= rhs + 3 combined standard errors
};

MomentInequalityReport verify_moment_inequality(const MomentEnsemble& ensemble, double q, std::size_t trials,
                                                std::uint64_t seed, MomentPart part, unsigned threads = 0);

}  // namespace maskcov
