#include "maskcov/experiments.hpp"

#include "maskcov/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>
#include <utility>

namespace maskcov {

namespace {

constexpr std::uint64_t kCalibrationStream = std::numeric_limits<std::uint64_t>::max();
constexpr std::size_t kCalibrationSamples = 20000;
constexpr int kCalibrationDirections = 256;
constexpr std::size_t kBlock = 256;
// Relative rounding allowance for deterministic inequalities evaluated in floating point.
constexpr double kRoundoff = 1e-12;

unsigned worker_count(unsigned requested, std::size_t work) {
    unsigned w = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(w, std::max<std::size_t>(work, 1)));
}

// fn(i) for i in [0, count), stored by index.
template <typename Fn>
auto parallel_map(std::size_t count, unsigned threads, Fn fn) {
    using T = decltype(fn(std::size_t{}));
    std::vector<T> out(count);
    const unsigned workers = worker_count(threads, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                try {
                    for (std::size_t i = next++; i < count; i = next++) out[i] = fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = count;
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
    return out;
}

// Sum of term(i) over fixed-size blocks, combined in block order.
template <typename T, typename Fn>
T ordered_sum(std::size_t count, unsigned threads, const T& zero, Fn term) {
    const std::size_t blocks = (count + kBlock - 1) / kBlock;
    auto partials = parallel_map(blocks, threads, [&](std::size_t b) {
        T acc = zero;
        const std::size_t end = std::min(count, (b + 1) * kBlock);
        for (std::size_t i = b * kBlock; i < end; ++i) acc += term(i);
        return acc;
    });
    T total = zero;
    for (const auto& part : partials) total += part;
    return total;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_and_se(std::span<const double> values) {
    const auto count = static_cast<double>(values.size());
    MeanSe out;
    if (values.empty()) return out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
    if (values.size() < 2) return out;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / (count - 1.0) / count);
    return out;
}

void require_gaussian(const DistributionSpec& model, const char* what) {
    if (model.family != Family::gaussian) {
        throw std::invalid_argument(std::string(what) + ": requires a Gaussian model");
    }
}

void require_trials(std::size_t trials, const char* what) {
    if (trials < 2) throw std::invalid_argument(std::string(what) + ": trials must be >= 2");
}

Eigen::MatrixXd schur_rank_one(const Eigen::MatrixXd& mask, const Eigen::VectorXd& x) {
    return x.asDiagonal() * mask * x.asDiagonal();
}

double sym_spectral_norm(const Eigen::MatrixXd& a) { return spectral_norm(trusted_symmetric(a)); }

Mask rebuild_mask(const Mask& mask, std::size_t p, std::optional<int> bandwidth) {
    const int b = bandwidth ? *bandwidth : mask.bandwidth.value_or(1);
    switch (mask.kind) {
        case MaskKind::banded: return banded_mask(p, b);
        case MaskKind::tapered: return tapered_mask(p, b);
        case MaskKind::all_ones:
            if (bandwidth) throw std::invalid_argument("scaling_study: all_ones mask has no bandwidth axis");
            return all_ones_mask(p);
        case MaskKind::custom:
            if (!bandwidth && p == mask.dim()) return mask;
            throw std::invalid_argument("scaling_study: custom masks cannot be rebuilt");
    }
    return mask;
}

}  // namespace

void ExperimentConfig::validate() const {
    std::vector<std::string> problems;
    if (trials < 2) problems.push_back("trials must be >= 2");
    if (n < 1) problems.push_back("n must be >= 1");
    if (model.covariance.dim() < 3) problems.push_back("p must be >= 3");
    if (mask.dim() != model.covariance.dim()) problems.push_back("mask dimension does not match p");
    if (eps && !(*eps > 0.0 && *eps < 1.0)) problems.push_back("eps must lie in (0,1)");
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        problems.push_back(e.what());
    }
    if (!problems.empty()) {
        std::ostringstream msg;
        msg << "invalid experiment config:";
        for (const auto& p : problems) msg << ' ' << p << ';';
        throw std::invalid_argument(msg.str());
    }
}

ExperimentResult run_variance_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const Sampler sampler(cfg.model);
    const SymMatrix& sigma = sampler.covariance();
    const SymMatrix target = schur_product(cfg.mask.matrix, sigma);

    ExperimentResult out;
    out.config = cfg;
    out.per_trial = parallel_map(cfg.trials, cfg.threads, [&](std::size_t t) {
        Rng rng = make_rng(derive_seed(cfg.seed, t));
        SampleSet s;
        sampler.draw_into(s.data, cfg.n, rng);
        return spectral_norm(masked_estimator(cfg.mask, s, cfg.centered) - target);
    });

    std::vector<double> squares(out.per_trial.size());
    std::transform(out.per_trial.begin(), out.per_trial.end(), squares.begin(), [](double e) { return e * e; });
    const MeanSe ms = mean_and_se(squares);
    out.empirical_rms = std::sqrt(ms.mean);
    out.std_error = out.empirical_rms > 0.0 ? ms.se / (2.0 * out.empirical_rms) : 0.0;

    const std::size_t p = sigma.dim();
    if (cfg.model.family == Family::gaussian) {
        out.theoretical = gaussian_bound(cfg.mask, sigma, cfg.n, /*explicit_constants=*/true);
        out.certified = true;
    } else {
        const SampleSet calibration =
            sampler.draw(std::max(kCalibrationSamples, cfg.n), derive_seed(cfg.seed, kCalibrationStream));
        const double orders[] = {4.0};
        const ConcentrationParams cp = empirical_params(calibration, orders, kCalibrationDirections,
                                                        derive_seed(cfg.seed, kCalibrationStream - 1));
        const auto grid = default_r_grid();
        const double emax = expected_max_bound(
            cfg.n, p, [&calibration](double order) { return empirical_mu(calibration, order); }, grid);
        out.theoretical = main_bound(mask_complexity(cfg.mask), cp, emax, cfg.n, p);
        out.theoretical.formula = "main_empirical";
        out.certified = false;
    }
    out.ratio = out.theoretical.total > 0.0 ? out.empirical_rms / out.theoretical.total : 0.0;
    return out;
}

std::string_view to_string(Axis axis) {
    switch (axis) {
        case Axis::n: return "n";
        case Axis::bandwidth: return "B";
        case Axis::p: return "p";
    }
    return "n";
}

Axis axis_from_string(std::string_view name) {
    if (name == "n") return Axis::n;
    if (name == "B" || name == "bandwidth") return Axis::bandwidth;
    if (name == "p") return Axis::p;
    throw std::invalid_argument("unknown scaling axis '" + std::string(name) + "' (expected n, B or p)");
}

std::vector<ScalingRow> scaling_study(const ExperimentConfig& base, Axis axis, std::span<const double> values) {
    std::vector<ScalingRow> rows;
    rows.reserve(values.size());
    for (double v : values) {
        if (!(v >= 1.0) || v != std::floor(v)) {
            throw std::invalid_argument("scaling_study: axis values must be positive integers");
        }
        ExperimentConfig cfg = base;
        const auto iv = static_cast<std::size_t>(v);
        switch (axis) {
            case Axis::n:
                cfg.n = iv;
                break;
            case Axis::bandwidth:
                cfg.mask = rebuild_mask(base.mask, base.mask.dim(), static_cast<int>(iv));
                break;
            case Axis::p:
                cfg.model.covariance = base.model.covariance.with_dim(iv);
                cfg.mask = rebuild_mask(base.mask, iv, std::nullopt);
                break;
        }
        rows.push_back({v, run_variance_experiment(cfg)});
    }
    return rows;
}

double log_log_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("log_log_slope: need two equal-length series of length >= 2");
    }
    const auto count = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("log_log_slope: values must be positive");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= count;
    my /= count;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw std::invalid_argument("log_log_slope: x values are all equal");
    return sxy / sxx;
}

SymMatrix gaussian_schur_second_moment(const SymMatrix& mask, const SymMatrix& sigma) {
    if (mask.dim() != sigma.dim()) throw std::invalid_argument("gaussian_schur_second_moment: dimension mismatch");
    const auto p = static_cast<Eigen::Index>(mask.dim());
    const Eigen::MatrixXd& m = mask.matrix();
    const Eigen::MatrixXd& s = sigma.matrix();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const Eigen::VectorXd mi = m.col(i);
        const Eigen::VectorXd si = s.col(i);
        // m_ji m_il (s_ii s_jl + 2 s_ij s_il)
        out += (mi * mi.transpose()).cwiseProduct(s(i, i) * s + 2.0 * si * si.transpose());
    }
    return trusted_symmetric(std::move(out));
}

VarianceLemmaReport verify_variance_lemma(const DistributionSpec& model, const Mask& mask,
                                          std::size_t trials, std::uint64_t seed, unsigned threads) {
    require_gaussian(model, "verify_variance_lemma");
    require_trials(trials, "verify_variance_lemma");
    const Sampler sampler(model);
    const SymMatrix& sigma = sampler.covariance();
    if (mask.dim() != sigma.dim()) throw std::invalid_argument("verify_variance_lemma: mask dimension mismatch");
    const auto p = static_cast<Eigen::Index>(sigma.dim());
    const Eigen::MatrixXd& m = mask.matrix.matrix();

    auto draw_square = [&](std::size_t t) {
        Rng rng = make_rng(derive_seed(seed, t));
        Eigen::MatrixXd x;
        sampler.draw_into(x, 1, rng);
        const Eigen::MatrixXd z = schur_rank_one(m, x.row(0).transpose());
        return Eigen::MatrixXd(z * z);
    };

    const Eigen::MatrixXd mean =
        ordered_sum(trials, threads, Eigen::MatrixXd(Eigen::MatrixXd::Zero(p, p)), draw_square) /
        static_cast<double>(trials);

    const double mu4 = gaussian_mu_exact(sigma, 2.0);
    const double nu = gaussian_nu(sigma);
    const double col = one_to_two_norm(mask.matrix);

    VarianceLemmaReport out;
    out.bound = mu4 * mu4 * nu * nu * col * col;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(trusted_symmetric(mean).matrix());
    if (solver.info() != Eigen::Success) throw NumericalError("verify_variance_lemma: eigensolver failed");
    out.lhs_lambda_max = solver.eigenvalues()(p - 1);
    out.max_violation = out.lhs_lambda_max - out.bound;

    // Standard error of v^T mean v along the top eigenvector.
    const Eigen::VectorXd v = solver.eigenvectors().col(p - 1);
    const auto quad = parallel_map(trials, threads, [&](std::size_t t) {
        Rng rng = make_rng(derive_seed(seed, t));
        Eigen::MatrixXd x;
        sampler.draw_into(x, 1, rng);
        return (schur_rank_one(m, x.row(0).transpose()) * v).squaredNorm();
    });
    out.std_error = mean_and_se(quad).se;
    out.holds = out.max_violation <= 5.0 * out.std_error;
    return out;
}

SchurNormLemmaReport verify_schur_norm_lemma(std::size_t trials, std::size_t p, std::uint64_t seed,
                                             unsigned threads) {
    if (trials < 1) throw std::invalid_argument("verify_schur_norm_lemma: trials must be >= 1");
    if (p < 1) throw std::invalid_argument("verify_schur_norm_lemma: p must be >= 1");
    const auto dim = static_cast<Eigen::Index>(p);

    const auto ratios = parallel_map(trials, threads, [&](std::size_t t) {
        Rng rng = make_rng(derive_seed(seed, t));
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::MatrixXd m(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i)
            for (Eigen::Index j = i; j < dim; ++j) m(i, j) = m(j, i) = normal(rng);
        Eigen::VectorXd x(dim);
        for (Eigen::Index i = 0; i < dim; ++i) x(i) = normal(rng);

        const double lhs = sym_spectral_norm(schur_rank_one(m, x));
        const double xinf = x.cwiseAbs().maxCoeff();
        const double rhs = sym_spectral_norm(m) * xinf * xinf;
        return rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    });

    SchurNormLemmaReport out;
    out.draws = trials;
    for (double r : ratios) {
        out.max_ratio = std::max(out.max_ratio, r);
        if (r > 1.0 + kRoundoff) ++out.violations;
    }
    out.holds = out.violations == 0;
    return out;
}

ExpectedMaxReport verify_expected_max_lemma(const DistributionSpec& model, std::size_t n,
                                            std::size_t trials, std::span<const double> r_grid,
                                            std::uint64_t seed, unsigned threads) {
    require_gaussian(model, "verify_expected_max_lemma");
    require_trials(trials, "verify_expected_max_lemma");
    if (n < 1) throw std::invalid_argument("verify_expected_max_lemma: n must be >= 1");
    const Sampler sampler(model);
    const SymMatrix& sigma = sampler.covariance();

    const auto maxima = parallel_map(trials, threads, [&](std::size_t t) {
        Rng rng = make_rng(derive_seed(seed, t));
        Eigen::MatrixXd x;
        sampler.draw_into(x, n, rng);
        const double top = x.cwiseAbs().maxCoeff();
        return top * top * top * top;
    });
    const MeanSe ms = mean_and_se(maxima);

    ExpectedMaxReport out;
    out.empirical = std::pow(ms.mean, 0.25);
    out.std_error = ms.mean > 0.0 ? ms.se / (4.0 * std::pow(ms.mean, 0.75)) : 0.0;
    out.bound = std::sqrt(expected_max_bound(
        n, sigma.dim(), [&sigma](double order) { return gaussian_mu_exact(sigma, order / 2.0); }, r_grid));
    out.ratio = out.bound > 0.0 ? out.empirical / out.bound : 0.0;
    out.holds = out.empirical <= out.bound + 3.0 * out.std_error;
    return out;
}

SymmetrizationReport verify_symmetrization(const DistributionSpec& model, const Mask& mask, std::size_t n,
                                           std::size_t trials, std::uint64_t seed, unsigned threads) {
    require_trials(trials, "verify_symmetrization");
    if (n < 1) throw std::invalid_argument("verify_symmetrization: n must be >= 1");
    const Sampler sampler(model);
    const SymMatrix& sigma = sampler.covariance();
    if (mask.dim() != sigma.dim()) throw std::invalid_argument("verify_symmetrization: mask dimension mismatch");
    const Eigen::MatrixXd& m = mask.matrix.matrix();
    const Eigen::MatrixXd mean_term = static_cast<double>(n) * m.cwiseProduct(sigma.matrix());

    const auto pairs = parallel_map(trials, threads, [&](std::size_t t) {
        Rng rng = make_rng(derive_seed(seed, t));
        Eigen::MatrixXd x;
        sampler.draw_into(x, n, rng);
        std::bernoulli_distribution coin(0.5);
        Eigen::VectorXd signs(x.rows());
        for (Eigen::Index i = 0; i < signs.size(); ++i) signs(i) = coin(rng) ? 1.0 : -1.0;

        const Eigen::MatrixXd centered = m.cwiseProduct(x.transpose() * x) - mean_term;
        const Eigen::MatrixXd signed_sum = m.cwiseProduct(x.transpose() * signs.asDiagonal() * x);
        return std::pair{sym_spectral_norm(centered), 2.0 * sym_spectral_norm(signed_sum)};
    });

    std::vector<double> lhs(trials), rhs(trials);
    for (std::size_t t = 0; t < trials; ++t) std::tie(lhs[t], rhs[t]) = pairs[t];
    const MeanSe l = mean_and_se(lhs);
    const MeanSe r = mean_and_se(rhs);

    SymmetrizationReport out;
    out.lhs = l.mean;
    out.rhs = r.mean;
    out.lhs_se = l.se;
    out.rhs_se = r.se;
    out.holds = out.lhs <= out.rhs + 3.0 * std::hypot(l.se, r.se);
    return out;
}

KhintchineReport verify_khintchine(std::span<const SymMatrix> matrices, double r, std::size_t trials,
                                   std::uint64_t seed, bool exact) {
    if (!(r >= 2.0)) throw std::invalid_argument("verify_khintchine: r must be >= 2");
    if (matrices.empty()) throw std::invalid_argument("verify_khintchine: need at least one matrix");
    const std::size_t k = matrices.size();
    const auto p = static_cast<Eigen::Index>(matrices.front().dim());
    for (const auto& a : matrices) {
        if (static_cast<Eigen::Index>(a.dim()) != p) throw std::invalid_argument("verify_khintchine: dimension mismatch");
    }

    auto schatten_power = [&](const auto& sign_of) {
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p, p);
        for (std::size_t i = 0; i < k; ++i) sum += sign_of(i) * matrices[i].matrix();
        const Vector ev = eigenvalues(trusted_symmetric(std::move(sum)));
        return ev.cwiseAbs().array().pow(r).sum();
    };

    KhintchineReport out;
    out.exact = exact;
    out.rhs = khintchine_rhs(matrices, r);
    if (exact) {
        if (k > 20) throw std::invalid_argument("verify_khintchine: exact mode supports at most 20 matrices");
        // ||S||_r is invariant under a global sign flip, so fix the first sign to +1.
        const std::uint64_t patterns = std::uint64_t{1} << (k - 1);
        double total = 0.0;
        for (std::uint64_t bits = 0; bits < patterns; ++bits) {
            total += schatten_power([bits](std::size_t i) {
                return i == 0 || ((bits >> (i - 1)) & 1U) == 0 ? 1.0 : -1.0;
            });
        }
        out.lhs = std::pow(total / static_cast<double>(patterns), 1.0 / r);
        out.holds = out.lhs <= out.rhs;
        return out;
    }

    require_trials(trials, "verify_khintchine");
    std::vector<double> values(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng = make_rng(derive_seed(seed, t));
        std::bernoulli_distribution coin(0.5);
        std::vector<double> signs(k);
        for (auto& s : signs) s = coin(rng) ? 1.0 : -1.0;
        values[t] = schatten_power([&signs](std::size_t i) { return signs[i]; });
    }
    const MeanSe ms = mean_and_se(values);
    out.lhs = std::pow(ms.mean, 1.0 / r);
    out.std_error = ms.mean > 0.0 ? ms.se / r * std::pow(ms.mean, 1.0 / r - 1.0) : 0.0;
    out.holds = out.lhs <= out.rhs + 3.0 * out.std_error;
    return out;
}

std::vector<SymMatrix> random_symmetric_ensemble(std::size_t k, std::size_t p, std::uint64_t seed) {
    if (k < 1 || p < 1) throw std::invalid_argument("random_symmetric_ensemble: k and p must be >= 1");
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto dim = static_cast<Eigen::Index>(p);
    std::vector<SymMatrix> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        Eigen::MatrixXd a(dim, dim);
        for (Eigen::Index r = 0; r < dim; ++r)
            for (Eigen::Index c = r; c < dim; ++c) a(r, c) = a(c, r) = normal(rng);
        out.push_back(trusted_symmetric(std::move(a)));
    }
    return out;
}

std::string_view to_string(MomentPart part) { return part == MomentPart::psd ? "psd" : "selfadj"; }

MomentPart moment_part_from_string(std::string_view name) {
    if (name == "psd") return MomentPart::psd;
    if (name == "selfadj") return MomentPart::selfadj;
    throw std::invalid_argument("unknown moment inequality part '" + std::string(name) + "' (expected psd or selfadj)");
}

MomentInequalityReport verify_moment_inequality(const MomentEnsemble& ensemble, double q, std::size_t trials,
                                                std::uint64_t seed, MomentPart part, unsigned threads) {
    const std::size_t p = ensemble.covariance.dim();
    if (p < 3) throw std::invalid_argument("verify_moment_inequality: requires p >= 3");
    if (ensemble.mask.dim() != p) throw std::invalid_argument("verify_moment_inequality: mask dimension mismatch");
    if (ensemble.summands < 1) throw std::invalid_argument("verify_moment_inequality: need at least one summand");
    require_trials(trials, "verify_moment_inequality");
    if (part == MomentPart::psd && !(q >= 1.0)) throw std::invalid_argument("verify_moment_inequality: psd part needs q >= 1");
    if (part == MomentPart::selfadj && !(q >= 2.0)) {
        throw std::invalid_argument("verify_moment_inequality: selfadj part needs q >= 2");
    }
    if (part == MomentPart::psd && !is_psd(ensemble.mask)) {
        throw std::invalid_argument("verify_moment_inequality: psd part needs a PSD mask");
    }

    DistributionSpec model;
    model.covariance = CovarianceSpec::custom(ensemble.covariance);
    const Sampler sampler(model);
    const Eigen::MatrixXd& m = ensemble.mask.matrix();
    const auto k = ensemble.summands;

    struct Draw {
        double sum_norm_q = 0.0;
        double max_norm_q = 0.0;
    };
    const auto draws = parallel_map(trials, threads, [&](std::size_t t) {
        Rng rng = make_rng(derive_seed(seed, t));
        Eigen::MatrixXd x;
        sampler.draw_into(x, k, rng);
        Eigen::VectorXd weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k));
        if (part == MomentPart::selfadj) {
            std::bernoulli_distribution coin(0.5);
            for (Eigen::Index i = 0; i < weights.size(); ++i) weights(i) = coin(rng) ? 1.0 : -1.0;
        }
        double largest = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            largest = std::max(largest, sym_spectral_norm(schur_rank_one(m, x.row(i).transpose())));
        }
        const Eigen::MatrixXd sum = m.cwiseProduct(x.transpose() * weights.asDiagonal() * x);
        return Draw{std::pow(sym_spectral_norm(sum), q), std::pow(largest, q)};
    });

    std::vector<double> sums(trials), maxima(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        sums[t] = draws[t].sum_norm_q;
        maxima[t] = draws[t].max_norm_q;
    }
    const MeanSe s = mean_and_se(sums);
    const MeanSe mx = mean_and_se(maxima);

    MomentInequalityReport out;
    out.r = moment_order(q, p);
    out.max_term = mx.mean;
    out.lhs = std::pow(s.mean, 1.0 / q);
    out.lhs_se = s.mean > 0.0 ? s.se / q * std::pow(s.mean, 1.0 / q - 1.0) : 0.0;

    const double kd = static_cast<double>(k);
    const double e = std::numbers::e;
    if (part == MomentPart::psd) {
        out.first_input = kd * spectral_norm(schur_product(ensemble.mask, ensemble.covariance));
        out.rhs = moment_bound_psd(out.first_input, out.max_term, q, out.r);
        if (mx.mean > 0.0) {
            const double root = std::sqrt(out.rhs);
            const double slope = 2.0 * root * 2.0 * std::sqrt(e * out.r) / (2.0 * q) *
                                 std::pow(mx.mean, 1.0 / (2.0 * q) - 1.0);
            out.rhs_se = slope * mx.se;
        }
    } else {
        const SymMatrix second = gaussian_schur_second_moment(ensemble.mask, ensemble.covariance);
        out.first_input = std::sqrt(kd * std::max(0.0, eigenvalues(second).maxCoeff()));
        out.rhs = moment_bound_selfadj(out.first_input, out.max_term, q, out.r);
        if (mx.mean > 0.0) out.rhs_se = 2.0 * e * out.r / q * std::pow(mx.mean, 1.0 / q - 1.0) * mx.se;
    }
    out.holds = out.lhs <= out.rhs + 3.0 * std::hypot(out.lhs_se, out.rhs_se);
    return out;
}

}  // namespace maskcov
