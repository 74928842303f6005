#include "maskcov/experiments.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace maskcov;

namespace {

ExperimentConfig gaussian_config(const CovarianceSpec& cov, Mask mask, std::size_t n, std::size_t trials) {
    ExperimentConfig cfg;
    cfg.model = DistributionSpec{cov, Family::gaussian, 9.0};
    cfg.mask = std::move(mask);
    cfg.n = n;
    cfg.trials = trials;
    cfg.seed = 2024;
    return cfg;
}

}  // namespace

TEST_CASE("config validation") {
    ExperimentConfig cfg = gaussian_config(CovarianceSpec::identity(8), banded_mask(8, 3), 10, 1);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.trials = 2;
    CHECK_NOTHROW(cfg.validate());
    cfg.eps = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.eps = 0.5;
    cfg.mask = banded_mask(7, 3);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.mask = banded_mask(8, 3);
    cfg.n = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("variance experiment on a gaussian model") {
    const ExperimentConfig cfg = gaussian_config(CovarianceSpec::identity(16), banded_mask(16, 3), 512, 100);
    const ExperimentResult r = run_variance_experiment(cfg);
    CHECK(r.per_trial.size() == 100);
    double mean_sq = 0.0;
    for (double e : r.per_trial) mean_sq += e * e;
    mean_sq /= 100.0;
    CHECK(r.empirical_rms * r.empirical_rms == doctest::Approx(mean_sq).epsilon(1e-12));
    CHECK(r.certified);
    CHECK(r.theoretical.formula == "gaussian_explicit");
    CHECK(r.empirical_rms <= r.theoretical.total + 3.0 * r.std_error);
    CHECK(r.ratio == doctest::Approx(r.empirical_rms / r.theoretical.total));
    CHECK(r.ratio <= 1.0);
    CHECK(r.std_error > 0.0);

    ExperimentConfig zero = cfg;
    zero.mask = custom_mask(SymMatrix::zeros(16));
    const ExperimentResult z = run_variance_experiment(zero);
    CHECK(z.empirical_rms == 0.0);
    CHECK(z.ratio == 0.0);
}

TEST_CASE("results do not depend on the thread count") {
    ExperimentConfig cfg = gaussian_config(CovarianceSpec::ar1(12, 0.5), tapered_mask(12, 5), 40, 37);
    cfg.threads = 1;
    const ExperimentResult a = run_variance_experiment(cfg);
    cfg.threads = 3;
    const ExperimentResult b = run_variance_experiment(cfg);
    CHECK(a.per_trial == b.per_trial);
    CHECK(a.empirical_rms == b.empirical_rms);
    CHECK(a.std_error == b.std_error);
    cfg.seed += 1;
    CHECK(run_variance_experiment(cfg).per_trial != a.per_trial);
}

TEST_CASE("heavy-tailed experiments are flagged as diagnostic") {
    ExperimentConfig cfg = gaussian_config(CovarianceSpec::ar1(6, 0.3), banded_mask(6, 3), 64, 20);
    cfg.model.family = Family::student_t;
    const ExperimentResult r = run_variance_experiment(cfg);
    CHECK_FALSE(r.certified);
    CHECK(r.theoretical.formula == "main_empirical");
    CHECK(r.theoretical.total > 0.0);
    CHECK(std::isfinite(r.ratio));
}

TEST_CASE("log-log slope") {
    const std::vector<double> x = {1, 2, 4, 8, 16};
    std::vector<double> y, lx, ly;
    for (double v : x) {
        y.push_back(3.0 * std::pow(v, -0.5) * (1.0 + 0.01 * std::sin(v)));
        lx.push_back(std::log(v));
        ly.push_back(std::log(y.back()));
    }
    CHECK(log_log_slope(x, y) == doctest::Approx(oracle::ols_slope(lx, ly)).epsilon(1e-12));
    const std::vector<double> exact = {2.0, 8.0, 32.0, 128.0, 512.0};
    CHECK(log_log_slope(x, exact) == doctest::Approx(2.0));
    const std::vector<double> one = {1.0};
    CHECK_THROWS_AS(log_log_slope(one, one), std::invalid_argument);
    const std::vector<double> neg = {1.0, -1.0};
    const std::vector<double> two = {1.0, 2.0};
    CHECK_THROWS_AS(log_log_slope(two, neg), std::invalid_argument);
}

TEST_CASE("scaling study along n and B") {
    const ExperimentConfig base = gaussian_config(CovarianceSpec::ar1(32, 0.5), banded_mask(32, 5), 64, 30);
    const std::vector<double> ns = {64, 256, 1024};
    const auto rows = scaling_study(base, Axis::n, ns);
    REQUIRE(rows.size() == 3);
    std::vector<double> rms;
    for (const auto& r : rows) rms.push_back(r.result.empirical_rms);
    const double slope = log_log_slope(ns, rms);
    CHECK(slope >= -0.6);
    CHECK(slope <= -0.4);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].result.theoretical.total < rows[i - 1].result.theoretical.total);
        CHECK(rows[i].result.config.n == static_cast<std::size_t>(ns[i]));
    }

    ExperimentConfig wide = gaussian_config(CovarianceSpec::identity(64), banded_mask(64, 3), 4096, 20);
    const std::vector<double> bs = {3, 9, 27};
    const auto brows = scaling_study(wide, Axis::bandwidth, bs);
    std::vector<double> brms;
    for (const auto& r : brows) {
        brms.push_back(r.result.empirical_rms);
        CHECK(r.result.config.mask.bandwidth == static_cast<int>(r.axis_value));
    }
    const double bslope = log_log_slope(bs, brms);
    CHECK(bslope >= 0.35);
    CHECK(bslope <= 0.65);
    for (std::size_t i = 1; i < brows.size(); ++i) {
        CHECK(brows[i].result.theoretical.total > brows[i - 1].result.theoretical.total);
    }

    const std::vector<double> ps = {8, 16};
    const auto prows = scaling_study(base, Axis::p, ps);
    CHECK(prows[1].result.config.mask.dim() == 16);
    CHECK(prows[1].result.config.model.covariance.dim() == 16);

    ExperimentConfig custom = base;
    custom.mask = custom_mask(banded_mask(32, 5).matrix);
    CHECK_THROWS_AS(scaling_study(custom, Axis::p, ps), std::invalid_argument);
    const std::vector<double> bad = {2.5};
    CHECK_THROWS_AS(scaling_study(base, Axis::n, bad), std::invalid_argument);
    CHECK(axis_from_string(to_string(Axis::bandwidth)) == Axis::bandwidth);
}

TEST_CASE("gaussian schur second moment") {
    const Mask m = tapered_mask(5, 5);
    const SymMatrix id = gaussian_schur_second_moment(m.matrix, SymMatrix::identity(5));
    for (std::size_t j = 0; j < 5; ++j) {
        double diag = 0.0;
        for (std::size_t i = 0; i < 5; ++i) diag += m.matrix(j, i) * m.matrix(j, i);
        CHECK(id(j, j) == doctest::Approx(diag + 2.0 * m.matrix(j, j) * m.matrix(j, j)));
        for (std::size_t l = 0; l < 5; ++l)
            if (l != j) CHECK(std::abs(id(j, l)) < 1e-14);
    }

    // Monte Carlo comparison on a correlated model
    const DistributionSpec g{CovarianceSpec::ar1(4, 0.6), Family::gaussian, 9.0};
    const Mask band = banded_mask(4, 3);
    const SymMatrix closed = gaussian_schur_second_moment(band.matrix, g.covariance.materialize());
    const SampleSet s = draw_samples(g, 200000, 31);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(4, 4), sumsq = sum;
    for (std::size_t k = 0; k < s.n(); ++k) {
        const Vector x = s.sample(k);
        const Eigen::MatrixXd z = x.asDiagonal() * band.matrix.matrix() * x.asDiagonal();
        const Eigen::MatrixXd z2 = z * z;
        sum += z2;
        sumsq += z2.cwiseProduct(z2);
    }
    const double n = static_cast<double>(s.n());
    const Eigen::MatrixXd mean = sum / n;
    const Eigen::MatrixXd se = ((sumsq / n - mean.cwiseProduct(mean)) / n).cwiseSqrt();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(std::abs(mean(i, j) - closed(i, j)) <= 5.0 * se(i, j) + 1e-12);
}

TEST_CASE("variance lemma") {
    const DistributionSpec scalar{CovarianceSpec::identity(1), Family::gaussian, 9.0};
    const VarianceLemmaReport one = verify_variance_lemma(scalar, all_ones_mask(1), 20000, 5);
    CHECK(one.bound == doctest::Approx(3.0));
    CHECK(one.lhs_lambda_max == doctest::Approx(3.0).epsilon(0.1));
    CHECK(one.holds);

    const DistributionSpec g{CovarianceSpec::ar1(8, 0.5), Family::gaussian, 9.0};
    const VarianceLemmaReport zero = verify_variance_lemma(g, custom_mask(SymMatrix::zeros(8)), 50, 1);
    CHECK(zero.lhs_lambda_max == 0.0);
    CHECK(zero.holds);

    const VarianceLemmaReport r = verify_variance_lemma(g, banded_mask(8, 3), 2000, 2, 2);
    CHECK(r.holds);
    CHECK(r.lhs_lambda_max <= r.bound);
    CHECK(r.std_error > 0.0);
    CHECK(r.max_violation == doctest::Approx(r.lhs_lambda_max - r.bound));

    DistributionSpec t = g;
    t.family = Family::student_t;
    CHECK_THROWS_AS(verify_variance_lemma(t, banded_mask(8, 3), 10, 1), std::invalid_argument);
}

TEST_CASE("schur norm lemma") {
    const SchurNormLemmaReport r = verify_schur_norm_lemma(500, 16, 3);
    CHECK(r.draws == 500);
    CHECK(r.violations == 0);
    CHECK(r.holds);
    CHECK(r.max_ratio <= 1.0);
    CHECK(r.max_ratio > 0.0);
    CHECK(verify_schur_norm_lemma(200, 1, 4).max_ratio == doctest::Approx(1.0));
}

TEST_CASE("expected maximum lemma") {
    const DistributionSpec unit{CovarianceSpec::identity(1), Family::gaussian, 9.0};
    const ExpectedMaxReport r = verify_expected_max_lemma(unit, 1, 20000, default_r_grid(), 6);
    CHECK(r.bound == doctest::Approx(std::pow(3.0, 0.25)));
    CHECK(r.ratio == doctest::Approx(1.0).epsilon(0.03));
    CHECK(r.holds);

    const DistributionSpec g{CovarianceSpec::ar1(16, 0.5), Family::gaussian, 9.0};
    const ExpectedMaxReport big = verify_expected_max_lemma(g, 64, 300, default_r_grid(), 7);
    CHECK(big.holds);
    CHECK(big.ratio < 1.0);
    const std::vector<double> narrow = {1.0};
    CHECK(verify_expected_max_lemma(g, 64, 50, narrow, 7).bound >= big.bound);
}

TEST_CASE("symmetrization") {
    const DistributionSpec g{CovarianceSpec::ar1(10, 0.4), Family::gaussian, 9.0};
    const SymmetrizationReport r = verify_symmetrization(g, banded_mask(10, 3), 20, 300, 8);
    CHECK(r.holds);
    CHECK(r.lhs > 0.0);

    const SymmetrizationReport z = verify_symmetrization(g, custom_mask(SymMatrix::zeros(10)), 5, 10, 8);
    CHECK(z.lhs == 0.0);
    CHECK(z.rhs == 0.0);
    CHECK(z.holds);

    const SymmetrizationReport two = verify_symmetrization(g, custom_mask(2.0 * banded_mask(10, 3).matrix), 20, 300, 8);
    CHECK(two.lhs == doctest::Approx(2.0 * r.lhs).epsilon(1e-12));
    CHECK(two.rhs == doctest::Approx(2.0 * r.rhs).epsilon(1e-12));

    const DistributionSpec sphere{CovarianceSpec::identity(6), Family::sphere_bounded, 9.0};
    CHECK(verify_symmetrization(sphere, all_ones_mask(6), 1, 400, 9).holds);
}

TEST_CASE("khintchine") {
    const SymMatrix a = SymMatrix::diagonal(Vector{{2.0, -1.0, 0.5}});
    const std::vector<SymMatrix> single = {a};
    const KhintchineReport s = verify_khintchine(single, 4.0, 0, 0, true);
    CHECK(s.lhs == doctest::Approx(schatten_norm(a, 4.0)));
    CHECK(s.holds);

    std::vector<SymMatrix> basis;
    for (int i = 0; i < 6; ++i) {
        Vector e = Vector::Zero(6);
        e(i) = 1.0;
        basis.push_back(SymMatrix::outer(e));
    }
    const KhintchineReport b = verify_khintchine(basis, 2.0, 0, 0, true);
    CHECK(b.lhs == doctest::Approx(std::sqrt(6.0)));
    CHECK(b.rhs == doctest::Approx(std::sqrt(12.0)));

    const auto ens = random_symmetric_ensemble(5, 4, 10);
    std::vector<oracle::Mat> ms;
    for (const auto& m : ens) ms.push_back(oracle::from(m.matrix()));
    const KhintchineReport e = verify_khintchine(ens, 4.0, 0, 0, true);
    CHECK(e.holds);
    CHECK(e.exact);
    CHECK(e.lhs == doctest::Approx(oracle::khintchine_lhs(ms, 4.0)).epsilon(1e-10));
    CHECK(e.rhs == doctest::Approx(oracle::khintchine_rhs(ms, 4.0)).epsilon(1e-10));

    const KhintchineReport mc = verify_khintchine(ens, 4.0, 4000, 11, false);
    CHECK(mc.holds);
    CHECK(std::abs(mc.lhs - e.lhs) <= 5.0 * mc.std_error);

    CHECK_THROWS_AS(verify_khintchine(ens, 1.5, 10, 1, true), std::invalid_argument);
    CHECK_THROWS_AS(verify_khintchine(random_symmetric_ensemble(21, 2, 1), 2.0, 10, 1, true), std::invalid_argument);
}

TEST_CASE("matrix moment inequality") {
    MomentEnsemble ens;
    ens.covariance = CovarianceSpec::ar1(8, 0.5).materialize();
    ens.mask = SymMatrix::ones(8);
    ens.summands = 32;
    const MomentInequalityReport psd = verify_moment_inequality(ens, 2.0, 300, 12, MomentPart::psd);
    CHECK(psd.holds);
    CHECK(psd.r == doctest::Approx(2.0 * std::log(8.0)));
    CHECK(psd.first_input == doctest::Approx(32.0 * spectral_norm(ens.covariance)));
    CHECK(psd.lhs <= psd.rhs);

    ens.mask = banded_mask(8, 3).matrix;
    CHECK_THROWS_AS(verify_moment_inequality(ens, 2.0, 10, 1, MomentPart::psd), std::invalid_argument);
    const MomentInequalityReport sa = verify_moment_inequality(ens, 2.0, 300, 13, MomentPart::selfadj);
    CHECK(sa.holds);
    CHECK(sa.lhs <= sa.rhs);

    ens.mask = SymMatrix::zeros(8);
    const MomentInequalityReport z = verify_moment_inequality(ens, 2.0, 10, 1, MomentPart::psd);
    CHECK(z.lhs == 0.0);
    CHECK(z.holds);

    CHECK(moment_part_from_string(to_string(MomentPart::selfadj)) == MomentPart::selfadj);
    CHECK_THROWS_AS(verify_moment_inequality(ens, 1.0, 10, 1, MomentPart::selfadj), std::invalid_argument);
}
