#pragma once

// Covariance models, seeded samplers and the concentration parameters mu_r, nu.

#include "maskcov/matrix_core.hpp"
#include "maskcov/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace maskcov {

enum class CovarianceKind { identity, ar1, decaying, rank_one_plus, custom };

std::string_view to_string(CovarianceKind kind);

/// Parametric description of a population covariance matrix.
///
///   identity        scale * I
///   ar1(rho)        rho^|i-j|, |rho| < 1
///   decaying(alpha) (|i-j| + 1)^-alpha, alpha > 1, must materialize PSD
///   rank_one_plus   lambda * v v^T + delta * I, v = normalized all-ones
///   custom          an explicit PSD matrix
class CovarianceSpec {
public:
    static CovarianceSpec identity(std::size_t p, double scale = 1.0);
    static CovarianceSpec ar1(std::size_t p, double rho);
    static CovarianceSpec decaying(std::size_t p, double alpha);
    static CovarianceSpec rank_one_plus(std::size_t p, double lambda, double delta);
    static CovarianceSpec custom(SymMatrix sigma);

    CovarianceKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    double scale() const { return scale_; }
    double rho() const { return rho_; }
    double alpha() const { return alpha_; }
    double lambda() const { return lambda_; }
    double delta() const { return delta_; }

    /// Same family at a different dimension. Custom specs cannot be resized.
    CovarianceSpec with_dim(std::size_t p) const;

    /// Throws std::invalid_argument for a decaying spec that is not PSD.
    SymMatrix materialize() const;

private:
    CovarianceSpec() = default;

    CovarianceKind kind_ = CovarianceKind::identity;
    std::size_t dim_ = 1;
    double scale_ = 1.0;
    double rho_ = 0.0;
    double alpha_ = 2.0;
    double lambda_ = 0.0;
    double delta_ = 1.0;
    std::optional<SymMatrix> custom_;
};

inline SymMatrix materialize(const CovarianceSpec& spec) { return spec.materialize(); }

enum class Family { gaussian, student_t, sphere_bounded };

std::string_view to_string(Family family);
Family family_from_string(std::string_view name);

/// Zero-mean distribution with covariance `covariance`. Student-t needs df > 4.
struct DistributionSpec {
    CovarianceSpec covariance = CovarianceSpec::identity(1);
    Family family = Family::gaussian;
    double df = 9.0;

    void validate() const;
};

/// n i.i.d. draws in R^p, stored one sample per row.
struct SampleSet {
    Eigen::MatrixXd data;
    std::uint64_t seed = 0;
    std::optional<DistributionSpec> model;

    std::size_t n() const { return static_cast<std::size_t>(data.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(data.cols()); }
    Vector sample(std::size_t k) const { return data.row(static_cast<Eigen::Index>(k)).transpose(); }

    /// Validates n >= 1, p >= 1 and finite entries.
    static SampleSet from_rows(Eigen::MatrixXd rows);
};

/// Draws samples x = Sigma^{1/2} g (Gaussian), the df-scaled multivariate t with
/// covariance exactly Sigma, or sqrt(p) Sigma^{1/2} u with u uniform on the sphere.
/// The square root is computed once, so one Sampler serves many trials.
class Sampler {
public:
    explicit Sampler(DistributionSpec model);

    const DistributionSpec& model() const { return model_; }
    const SymMatrix& covariance() const { return sigma_; }
    std::size_t dim() const { return sigma_.dim(); }

    /// Deterministic in (model, n, seed).
    SampleSet draw(std::size_t n, std::uint64_t seed) const;

    /// Fills `out` (resized to n x p) from an existing generator.
    void draw_into(Eigen::MatrixXd& out, std::size_t n, Rng& rng) const;

private:
    DistributionSpec model_;
    SymMatrix sigma_;
    Eigen::MatrixXd root_;
};

SampleSet draw_samples(const DistributionSpec& model, std::size_t n, std::uint64_t seed);

enum class Provenance { closed_form, empirical };

/// mu: order r -> mu_r = max_i (E|X_i|^r)^{1/r}; nu = sup_{|u|=1} (E|u^T x|^4)^{1/4}.
struct ConcentrationParams {
    std::map<double, double> mu;
    double nu = 0.0;
    Provenance provenance = Provenance::closed_form;

    /// Throws std::out_of_range when order r was not computed.
    double mu_at(double r) const;
};

/// Upper bound on the Gaussian diagonal moment mu_{2r}: sqrt(r * max_i sigma_ii). Valid for real r >= 1.
double gaussian_mu(const SymMatrix& sigma, double r);

/// Exact Gaussian mu_{2r} = (E|Z|^{2r})^{1/(2r)} sqrt(max_i sigma_ii) for real r >= 1/2.
/// For integer r, E|Z|^{2r} = (2r)! / (2^r r!).
double gaussian_mu_exact(const SymMatrix& sigma, double r);

/// 3^{1/4} ||Sigma||^{1/2}; attained along the top eigenvector.
double gaussian_nu(const SymMatrix& sigma);

/// Closed-form Gaussian parameters at the requested L_r orders (each >= 1).
/// `exact` selects exact moments over the sqrt(r) upper bound.
ConcentrationParams gaussian_params(const SymMatrix& sigma, std::span<const double> orders, bool exact);

double empirical_mu(const SampleSet& s, double r);

/// Lower estimate of nu: the maximum over `n_directions` random unit vectors plus
/// the eigenvectors of the sample second-moment matrix.
double empirical_nu(const SampleSet& s, int n_directions, std::uint64_t seed);

ConcentrationParams empirical_params(const SampleSet& s, std::span<const double> orders,
                                     int n_directions, std::uint64_t seed);

/// Subtracts the sample mean from every row.
SampleSet center_samples(const SampleSet& s);

// Samples file: first line "n p", then n rows of p numbers.
SampleSet read_samples(std::istream& in);
SampleSet read_samples_file(const std::string& path);
void write_samples(std::ostream& out, const SampleSet& s);

}  // namespace maskcov
