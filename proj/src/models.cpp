#include "maskcov/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace maskcov {

namespace {

void require_positive_dim(std::size_t p, const char* what) {
    if (p < 1) throw std::invalid_argument(std::string(what) + ": p must be positive");
}

double max_diagonal(const SymMatrix& sigma) { return sigma.matrix().diagonal().maxCoeff(); }

// E|Z|^q for standard normal Z and real q > -1.
double abs_normal_moment(double q) {
    return std::exp(0.5 * q * std::numbers::ln2 + std::lgamma(0.5 * (q + 1.0)) -
                    0.5 * std::log(std::numbers::pi));
}

double fourth_moment_along(const Eigen::MatrixXd& data, const Vector& u) {
    const Vector proj = data * u;
    return proj.array().square().square().mean();
}

}  // namespace

std::string_view to_string(CovarianceKind kind) {
    switch (kind) {
        case CovarianceKind::identity: return "identity";
        case CovarianceKind::ar1: return "ar1";
        case CovarianceKind::decaying: return "decaying";
        case CovarianceKind::rank_one_plus: return "rank_one_plus";
        case CovarianceKind::custom: return "custom";
    }
    return "custom";
}

CovarianceSpec CovarianceSpec::identity(std::size_t p, double scale) {
    require_positive_dim(p, "identity covariance");
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw std::invalid_argument("identity covariance: scale must be positive and finite");
    }
    CovarianceSpec s;
    s.kind_ = CovarianceKind::identity;
    s.dim_ = p;
    s.scale_ = scale;
    return s;
}

CovarianceSpec CovarianceSpec::ar1(std::size_t p, double rho) {
    require_positive_dim(p, "ar1 covariance");
    if (!(rho > -1.0 && rho < 1.0)) {
        throw std::invalid_argument("ar1 covariance: rho must lie in (-1, 1)");
    }
    CovarianceSpec s;
    s.kind_ = CovarianceKind::ar1;
    s.dim_ = p;
    s.rho_ = rho;
    return s;
}

CovarianceSpec CovarianceSpec::decaying(std::size_t p, double alpha) {
    require_positive_dim(p, "decaying covariance");
    if (!(alpha > 1.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("decaying covariance: alpha must be a finite real > 1");
    }
    CovarianceSpec s;
    s.kind_ = CovarianceKind::decaying;
    s.dim_ = p;
    s.alpha_ = alpha;
    s.materialize();
    return s;
}

CovarianceSpec CovarianceSpec::rank_one_plus(std::size_t p, double lambda, double delta) {
    require_positive_dim(p, "rank_one_plus covariance");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("rank_one_plus covariance: lambda must be >= 0");
    }
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw std::invalid_argument("rank_one_plus covariance: delta must be > 0");
    }
    CovarianceSpec s;
    s.kind_ = CovarianceKind::rank_one_plus;
    s.dim_ = p;
    s.lambda_ = lambda;
    s.delta_ = delta;
    return s;
}

CovarianceSpec CovarianceSpec::custom(SymMatrix sigma) {
    if (!is_psd(sigma)) throw std::invalid_argument("custom covariance: matrix is not PSD");
    CovarianceSpec s;
    s.kind_ = CovarianceKind::custom;
    s.dim_ = sigma.dim();
    s.custom_ = std::move(sigma);
    return s;
}

CovarianceSpec CovarianceSpec::with_dim(std::size_t p) const {
    switch (kind_) {
        case CovarianceKind::identity: return identity(p, scale_);
        case CovarianceKind::ar1: return ar1(p, rho_);
        case CovarianceKind::decaying: return decaying(p, alpha_);
        case CovarianceKind::rank_one_plus: return rank_one_plus(p, lambda_, delta_);
        case CovarianceKind::custom:
            if (p == dim_) return *this;
            throw std::invalid_argument("custom covariance cannot be resized");
    }
    return *this;
}

SymMatrix CovarianceSpec::materialize() const {
    const auto n = static_cast<Eigen::Index>(dim_);
    switch (kind_) {
        case CovarianceKind::identity:
            return SymMatrix::identity(dim_) * scale_;
        case CovarianceKind::ar1: {
            Eigen::MatrixXd m(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j)
                    m(i, j) = std::pow(rho_, static_cast<double>(std::abs(i - j)));
            return trusted_symmetric(std::move(m));
        }
        case CovarianceKind::decaying: {
            Eigen::MatrixXd m(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j)
                    m(i, j) = std::pow(static_cast<double>(std::abs(i - j) + 1), -alpha_);
            SymMatrix sigma = trusted_symmetric(std::move(m));
            if (!is_psd(sigma)) {
                std::ostringstream msg;
                msg << "decaying covariance (alpha = " << alpha_ << ", p = " << dim_
                    << ") is not positive semidefinite";
                throw std::invalid_argument(msg.str());
            }
            return sigma;
        }
        case CovarianceKind::rank_one_plus: {
            // lambda * (1/p) * ones + delta * I
            Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, lambda_ / static_cast<double>(dim_));
            m.diagonal().array() += delta_;
            return trusted_symmetric(std::move(m));
        }
        case CovarianceKind::custom:
            return *custom_;
    }
    throw std::logic_error("unreachable covariance kind");
}

std::string_view to_string(Family family) {
    switch (family) {
        case Family::gaussian: return "gaussian";
        case Family::student_t: return "student_t";
        case Family::sphere_bounded: return "sphere_bounded";
    }
    return "gaussian";
}

Family family_from_string(std::string_view name) {
    if (name == "gaussian") return Family::gaussian;
    if (name == "student_t") return Family::student_t;
    if (name == "sphere_bounded") return Family::sphere_bounded;
    throw std::invalid_argument("unknown distribution family '" + std::string(name) + "'");
}

void DistributionSpec::validate() const {
    if (family == Family::student_t && !(df > 4.0)) {
        throw std::invalid_argument("student_t family needs df > 4 for finite fourth moments");
    }
}

SampleSet SampleSet::from_rows(Eigen::MatrixXd rows) {
    if (rows.rows() < 1 || rows.cols() < 1) {
        throw std::invalid_argument("SampleSet: need n >= 1 samples of dimension p >= 1");
    }
    if (!rows.allFinite()) throw std::invalid_argument("SampleSet: samples must be finite");
    SampleSet s;
    s.data = std::move(rows);
    return s;
}

Sampler::Sampler(DistributionSpec model) : model_(std::move(model)) {
    model_.validate();
    sigma_ = model_.covariance.materialize();
    root_ = psd_sqrt(sigma_).matrix();
}

void Sampler::draw_into(Eigen::MatrixXd& out, std::size_t n, Rng& rng) const {
    const auto p = static_cast<Eigen::Index>(dim());
    const auto rows = static_cast<Eigen::Index>(n);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(rows, p);
    switch (model_.family) {
        case Family::gaussian:
            for (Eigen::Index k = 0; k < rows; ++k)
                for (Eigen::Index i = 0; i < p; ++i) g(k, i) = normal(rng);
            break;
        case Family::student_t: {
            // sqrt(df / chi2) makes a t vector; the extra sqrt((df - 2) / df) restores covariance I.
            std::chi_squared_distribution<double> chi2(model_.df);
            for (Eigen::Index k = 0; k < rows; ++k) {
                for (Eigen::Index i = 0; i < p; ++i) g(k, i) = normal(rng);
                g.row(k) *= std::sqrt((model_.df - 2.0) / chi2(rng));
            }
            break;
        }
        case Family::sphere_bounded: {
            const double radius = std::sqrt(static_cast<double>(p));
            for (Eigen::Index k = 0; k < rows; ++k) {
                double norm = 0.0;
                while (norm == 0.0) {
                    for (Eigen::Index i = 0; i < p; ++i) g(k, i) = normal(rng);
                    norm = g.row(k).norm();
                }
                g.row(k) *= radius / norm;
            }
            break;
        }
    }
    // Rows are samples, so x^T = g^T R with R symmetric.
    out.noalias() = g * root_;
}

SampleSet Sampler::draw(std::size_t n, std::uint64_t seed) const {
    if (n < 1) throw std::invalid_argument("draw_samples: n must be >= 1");
    Rng rng = make_rng(seed);
    SampleSet s;
    draw_into(s.data, n, rng);
    s.seed = seed;
    s.model = model_;
    return s;
}

SampleSet draw_samples(const DistributionSpec& model, std::size_t n, std::uint64_t seed) {
    return Sampler(model).draw(n, seed);
}

double ConcentrationParams::mu_at(double r) const {
    auto it = mu.find(r);
    if (it == mu.end()) {
        throw std::out_of_range("concentration parameter mu_" + std::to_string(r) + " not available");
    }
    return it->second;
}

double gaussian_mu(const SymMatrix& sigma, double r) {
    if (!(r >= 1.0)) throw std::invalid_argument("gaussian_mu: r must be >= 1");
    return std::sqrt(r * max_diagonal(sigma));
}

double gaussian_mu_exact(const SymMatrix& sigma, double r) {
    if (!(r >= 0.5)) throw std::invalid_argument("gaussian_mu_exact: r must be >= 1/2");
    const double q = 2.0 * r;
    return std::pow(abs_normal_moment(q), 1.0 / q) * std::sqrt(max_diagonal(sigma));
}

double gaussian_nu(const SymMatrix& sigma) {
    return std::pow(3.0, 0.25) * std::sqrt(spectral_norm(sigma));
}

ConcentrationParams gaussian_params(const SymMatrix& sigma, std::span<const double> orders, bool exact) {
    ConcentrationParams cp;
    cp.provenance = Provenance::closed_form;
    for (double order : orders) {
        if (!(order >= 1.0)) throw std::invalid_argument("gaussian_params: orders must be >= 1");
        if (exact) {
            cp.mu[order] = gaussian_mu_exact(sigma, order / 2.0);
        } else {
            // The sqrt(r) form needs r = order / 2 >= 1; below that the exact value is used.
            cp.mu[order] = order >= 2.0 ? gaussian_mu(sigma, order / 2.0) : gaussian_mu_exact(sigma, order / 2.0);
        }
    }
    cp.nu = gaussian_nu(sigma);
    return cp;
}

double empirical_mu(const SampleSet& s, double r) {
    if (!(r >= 1.0)) throw std::invalid_argument("empirical_mu: r must be >= 1");
    const Eigen::ArrayXXd powered = s.data.array().abs().pow(r);
    return std::pow(powered.colwise().mean().maxCoeff(), 1.0 / r);
}

double empirical_nu(const SampleSet& s, int n_directions, std::uint64_t seed) {
    if (n_directions < 1) throw std::invalid_argument("empirical_nu: n_directions must be >= 1");
    const auto p = static_cast<Eigen::Index>(s.p());
    double best = 0.0;

    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector u(p);
    for (int d = 0; d < n_directions; ++d) {
        double norm = 0.0;
        while (norm == 0.0) {
            for (Eigen::Index i = 0; i < p; ++i) u(i) = normal(rng);
            norm = u.norm();
        }
        best = std::max(best, fourth_moment_along(s.data, u / norm));
    }

    const Eigen::MatrixXd second = s.data.transpose() * s.data / static_cast<double>(s.n());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(second);
    if (solver.info() != Eigen::Success) throw NumericalError("empirical_nu: eigensolver failed");
    for (Eigen::Index j = 0; j < p; ++j) {
        best = std::max(best, fourth_moment_along(s.data, solver.eigenvectors().col(j)));
    }
    return std::pow(best, 0.25);
}

ConcentrationParams empirical_params(const SampleSet& s, std::span<const double> orders,
                                     int n_directions, std::uint64_t seed) {
    ConcentrationParams cp;
    cp.provenance = Provenance::empirical;
    for (double order : orders) cp.mu[order] = empirical_mu(s, order);
    cp.nu = empirical_nu(s, n_directions, seed);
    return cp;
}

SampleSet center_samples(const SampleSet& s) {
    SampleSet out = s;
    const Eigen::RowVectorXd mean = s.data.colwise().mean();
    out.data.rowwise() -= mean;
    return out;
}

SampleSet read_samples(std::istream& in) {
    long long n = 0;
    long long p = 0;
    if (!(in >> n >> p) || n < 1 || p < 1) {
        throw std::invalid_argument("samples file: header must be 'n p' with positive integers");
    }
    Eigen::MatrixXd rows(n, p);
    for (long long k = 0; k < n; ++k) {
        for (long long i = 0; i < p; ++i) {
            if (!(in >> rows(k, i))) {
                std::ostringstream msg;
                msg << "samples file: parse failed at sample " << k + 1 << " entry " << i + 1;
                throw std::invalid_argument(msg.str());
            }
        }
    }
    std::string extra;
    if (in >> extra) throw std::invalid_argument("samples file: trailing data after samples");
    return SampleSet::from_rows(std::move(rows));
}

SampleSet read_samples_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open samples file '" + path + "'");
    return read_samples(in);
}

void write_samples(std::ostream& out, const SampleSet& s) {
    out << s.n() << ' ' << s.p() << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index k = 0; k < s.data.rows(); ++k) {
        for (Eigen::Index i = 0; i < s.data.cols(); ++i) {
            if (i) out << ' ';
            out << s.data(k, i);
        }
        out << '\n';
    }
}

}  // namespace maskcov
