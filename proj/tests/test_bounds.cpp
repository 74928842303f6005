#include "maskcov/bounds.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace maskcov;

namespace {

constexpr double kE = std::numbers::e;
const double kPi = std::acos(-1.0);

ConcentrationParams params(double mu4, double nu) {
    ConcentrationParams cp;
    cp.mu[4.0] = mu4;
    cp.nu = nu;
    return cp;
}

}  // namespace

TEST_CASE("main bound by hand at p = 16, n = 256, B = 3, identity covariance") {
    const double p = 16, n = 256;
    const double scale = 8.0 * kE * std::log(p) / n;
    const double col_sq = 3.0;
    const double spec = 1.0 + 2.0 * std::cos(kPi / 17.0);
    const double mu4 = std::sqrt(2.0);
    const double nu = std::pow(3.0, 0.25);
    const double emax = kE * std::log(p * n);
    const double moderate = std::sqrt(scale) * std::sqrt(col_sq) * mu4 * nu;
    const double large = scale * spec * emax;

    const BoundReport g = gaussian_bound(banded_mask(16, 3), SymMatrix::identity(16), 256, true);
    CHECK(g.formula == "gaussian_explicit");
    CHECK(g.moderate_term == doctest::Approx(moderate).epsilon(1e-12));
    CHECK(g.large_dev_term == doctest::Approx(large).epsilon(1e-12));
    CHECK(g.total == doctest::Approx(moderate + large).epsilon(1e-12));
    CHECK(g.total == doctest::Approx(17.358566170132583).epsilon(1e-12));

    const BoundReport m = main_bound({col_sq, spec}, params(mu4, nu), emax, 256, 16);
    CHECK(m.total == doctest::Approx(g.total).epsilon(1e-12));
}

TEST_CASE("main bound structure") {
    const ConcentrationParams cp = params(1.3, 1.4);
    CHECK(main_bound({0.0, 0.0}, cp, 5.0, 100, 10).total == 0.0);

    const BoundReport a = main_bound({3.0, 2.5}, cp, 5.0, 100, 10);
    const BoundReport b = main_bound({3.0, 2.5}, cp, 5.0, 200, 10);
    CHECK(a.moderate_term / b.moderate_term == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(a.large_dev_term / b.large_dev_term == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(a.total == a.moderate_term + a.large_dev_term);

    CHECK(main_bound({4.0, 2.5}, cp, 5.0, 100, 10).total > a.total);
    CHECK(main_bound({3.0, 3.5}, cp, 5.0, 100, 10).total > a.total);
    CHECK(main_bound({3.0, 2.5}, params(1.5, 1.4), 5.0, 100, 10).total > a.total);
    CHECK(main_bound({3.0, 2.5}, params(1.3, 1.6), 5.0, 100, 10).total > a.total);
    CHECK(main_bound({3.0, 2.5}, cp, 6.0, 100, 10).total > a.total);

    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n = 1; n < 100000; n *= 3) {
        const double t = main_bound({3.0, 2.5}, cp, 5.0, n, 10).total;
        CHECK(std::isfinite(t));
        CHECK(t < prev);
        prev = t;
    }

    CHECK_THROWS_AS(main_bound({1, 1}, cp, 1.0, 10, 2), std::invalid_argument);
    CHECK_THROWS_AS(main_bound({1, 1}, cp, 1.0, 0, 5), std::invalid_argument);
    CHECK_THROWS_AS(main_bound({1, 1}, ConcentrationParams{}, 1.0, 10, 5), std::out_of_range);
}

TEST_CASE("expected maximum bound") {
    const SymMatrix sigma = 2.0 * SymMatrix::identity(3);
    const MomentFn bound_mu = [&](double q) { return gaussian_mu(sigma, q / 2.0); };
    const double one[] = {1.0};
    // np = 3 < e^2, so only r = 1 is admissible.
    CHECK(expected_max_bound(1, 3, bound_mu, one) == doctest::Approx(std::sqrt(3.0) * 4.0).epsilon(1e-12));

    for (std::size_t n : {8, 100, 5000}) {
        const double np = static_cast<double>(n) * 3.0;
        const double closed = kE * std::log(np) * max_norm(sigma);
        CHECK(expected_max_bound(n, 3, bound_mu, default_r_grid()) == doctest::Approx(closed).epsilon(1e-12));
    }

    const MomentFn exact_mu = [&](double q) { return gaussian_mu_exact(sigma, q / 2.0); };
    const std::vector<double> small = {1.0, 2.0};
    const std::vector<double> large = {1.0, 1.1, 1.7, 2.0, 2.5, 3.3, 5.0, 9.0};
    for (std::size_t n : {1, 10, 1000}) {
        CHECK(expected_max_bound(n, 3, exact_mu, large) <= expected_max_bound(n, 3, exact_mu, small));
    }
    const double bad[] = {0.5};
    CHECK_THROWS_AS(expected_max_bound(10, 3, exact_mu, bad), std::invalid_argument);
}

TEST_CASE("gaussian bound") {
    const Mask m = banded_mask(32, 5);
    const SymMatrix s0 = CovarianceSpec::ar1(32, 0.4).materialize();
    for (bool explicit_constants : {true, false}) {
        const double t0 = gaussian_bound(m, s0, 200, explicit_constants, 1.5).total;
        const double t1 = gaussian_bound(m, 9.0 * s0, 200, explicit_constants, 1.5).total;
        CHECK(t1 == doctest::Approx(9.0 * t0).epsilon(1e-12));
    }

    // composition of the closed-form ingredients
    const double orders[] = {4.0};
    const ConcentrationParams cp = gaussian_params(s0, orders, false);
    const double emax = expected_max_bound(
        200, 32, [&](double q) { return gaussian_mu(s0, q / 2.0); }, default_r_grid());
    const BoundReport composed = main_bound(mask_complexity(m), cp, emax, 200, 32);
    CHECK(gaussian_bound(m, s0, 200, true).total == doctest::Approx(composed.total).epsilon(1e-12));

    const BoundReport shape = gaussian_bound(m, s0, 200, false, 2.0);
    CHECK(shape.formula == "gaussian_shape");
    CHECK(gaussian_bound(m, s0, 200, false, 1.0).total * 2.0 == doctest::Approx(shape.total).epsilon(1e-12));

    const SymMatrix spiked = CovarianceSpec::rank_one_plus(64, 63.0, 1.0).materialize();
    const SymMatrix flat = CovarianceSpec::identity(64, 64.0).materialize();
    CHECK(spectral_norm(spiked) == doctest::Approx(spectral_norm(flat)));
    CHECK(max_norm(spiked) / spectral_norm(spiked) == doctest::Approx((63.0 / 64.0 + 1.0) / 64.0));
    const Mask b64 = banded_mask(64, 5);
    CHECK(gaussian_bound(b64, spiked, 256, true).total < gaussian_bound(b64, flat, 256, true).total);
    CHECK(gaussian_bound(b64, spiked, 256, false).total < gaussian_bound(b64, flat, 256, false).total);

    CHECK_THROWS_AS(gaussian_bound(banded_mask(2, 1), SymMatrix::identity(2), 10, true), std::invalid_argument);
}

TEST_CASE("sample complexity formulas") {
    const MaskComplexity mc{5.0, 4.0};
    const SampleComplexity a = sample_complexity_masked(mc, 100, 0.5, 0.2);
    const SampleComplexity b = sample_complexity_masked(mc, 100, 0.5, 0.1);
    CHECK(b.first_term == doctest::Approx(4.0 * a.first_term));
    CHECK(b.second_term == doctest::Approx(2.0 * a.second_term));
    CHECK(a.samples == static_cast<std::uint64_t>(std::ceil(a.first_term + a.second_term)));
    CHECK(sample_complexity_masked({0.0, 0.0}, 100, 1.0, 0.3).samples == 0);

    for (double bw : {3.0, 9.0}) {
        const SampleComplexity masked = sample_complexity_masked({bw, bw}, 256, 0.7, 0.3, 2.0);
        const SampleComplexity banded = sample_complexity_banded(bw, 256, 0.7, 0.3, 2.0);
        CHECK(masked.value == doctest::Approx(banded.value).epsilon(1e-12));
        CHECK(masked.samples == banded.samples);
        CHECK(sample_complexity_banded(2 * bw, 256, 0.7, 0.3, 2.0).samples <= 2 * banded.samples + 1);
    }
    CHECK(sample_complexity_banded(1, std::numbers::e, 1, 1, 1).samples == 2);

    // bound --formula complexity-banded --B 9 --p 256 --eps 0.5
    const double l = std::log(256.0);
    CHECK(sample_complexity_banded(9, 256, 1, 0.5, 1).samples ==
          static_cast<std::uint64_t>(std::ceil(9 * l / 0.25 + 9 * l * l / 0.5)));
    CHECK(sample_complexity_banded(9, 256, 1, 0.5, 1).samples == 754);
    const SampleComplexity big = sample_complexity_banded(9, 1e8, 1, 0.99, 1);
    CHECK(big.second_term > big.first_term);

    const SampleComplexity lv = sample_complexity_lv({9, 9}, 256, 0.5, 1);
    const SampleComplexity ms = sample_complexity_masked({9, 9}, 256, 1, 0.5, 1);
    CHECK(lv.first_term / ms.first_term == doctest::Approx(std::pow(l, 4)).epsilon(1e-12));
    const SampleComplexity lv_e = sample_complexity_lv({2, 2}, std::numbers::e, 0.5, 1);
    CHECK(lv_e.first_term == doctest::Approx(sample_complexity_masked({2, 2}, std::numbers::e, 1, 0.5, 1).first_term));
    for (double p : {3.0, 10.0, 1000.0})
        for (double eps : {0.05, 0.5, 0.9}) {
            CHECK(sample_complexity_lv(mc, p, eps).samples >= sample_complexity_masked(mc, p, 1.0, eps).samples);
        }
    CHECK(sample_complexity_lv(banded_mask(16, 3), 0.5).samples ==
          sample_complexity_lv(mask_complexity(banded_mask(16, 3)), 16, 0.5).samples);

    CHECK(sample_complexity_classical(37, 1).samples == 37);
    CHECK(sample_complexity_classical(37, 0.5).samples == 148);
    CHECK(sample_complexity_classical(74, 1).samples == 74);

    CHECK_THROWS_AS(sample_complexity_classical(10, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sample_complexity_banded(3, 10, 1, -1, 1), std::invalid_argument);
}

TEST_CASE("banded bias bound") {
    CHECK(banded_bias_bound(2.0, 4).bias_bound == doctest::Approx(0.4));
    CHECK(banded_bias_bound(2.0, 4).sigma_norm_bound == doctest::Approx(3.0));
    CHECK(banded_bias_bound(1.5, 1000000).bias_bound < 0.01);
    CHECK_THROWS_AS(banded_bias_bound(1.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(banded_bias_bound(2.0, -1), std::invalid_argument);

    for (double alpha : {1.5, 2.0, 3.0}) {
        const SymMatrix sigma = CovarianceSpec::decaying(128, alpha).materialize();
        CHECK(spectral_norm(sigma) <= banded_bias_bound(alpha, 0).sigma_norm_bound);
        for (int b : {0, 1, 3, 7}) {
            const SymMatrix diff = schur_product(banded_mask(128, 2 * b + 1).matrix, sigma) - sigma;
            // column sums of the off-band tail dominate the spectral norm
            CHECK(spectral_norm(diff) <= gershgorin_column_bound(diff) + 1e-12);
            CHECK(gershgorin_column_bound(diff) <= banded_bias_bound(alpha, b).bias_bound + 1e-12);
        }
    }
}

TEST_CASE("matrix moment bounds") {
    CHECK(moment_bound_psd(3.0, 0.0, 2.0, 5.0) == doctest::Approx(3.0));
    CHECK(moment_bound_psd(0.0, 16.0, 2.0, 5.0) == doctest::Approx(4.0 * kE * 5.0 * 4.0));
    CHECK(moment_bound_psd(1.0, 2.0, 2.0, 6.0) > moment_bound_psd(1.0, 2.0, 2.0, 5.0));
    CHECK_THROWS_AS(moment_bound_psd(1.0, 1.0, 0.5, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(moment_bound_psd(1.0, 1.0, 3.0, 2.0), std::invalid_argument);

    const double p = 20.0, r = 2.0 * std::log(p);
    CHECK(moment_order(2.0, 20) == doctest::Approx(r));
    CHECK(moment_order(9.0, 20) == 9.0);
    CHECK(moment_bound_selfadj(1.7, 4.0, 2.0, r) ==
          doctest::Approx(std::sqrt(2.0 * kE * std::log(p)) * 1.7 + 4.0 * kE * std::log(p) * 2.0).epsilon(1e-12));
    CHECK(moment_bound_selfadj(0.0, 0.0, 2.0, r) == 0.0);
    CHECK(moment_bound_selfadj(1.7, 4.0, 2.0, r) ==
          doctest::Approx(moment_bound_selfadj(1.7, 0.0, 2.0, r) + moment_bound_selfadj(0.0, 4.0, 2.0, r)));
    CHECK_THROWS_AS(moment_bound_selfadj(1.0, 1.0, 1.5, 3.0), std::invalid_argument);
}

TEST_CASE("khintchine right-hand side") {
    const SymMatrix a = SymMatrix::diagonal(Vector{{2.0, -1.0, 0.5}});
    const std::vector<SymMatrix> single = {a};
    CHECK(khintchine_rhs(single, 4.0) == doctest::Approx(2.0 * schatten_norm(a, 4.0)));
    const std::vector<SymMatrix> zero = {SymMatrix::zeros(3), SymMatrix::zeros(3)};
    CHECK(khintchine_rhs(zero, 2.0) == 0.0);

    std::vector<SymMatrix> basis;
    for (int i = 0; i < 5; ++i) {
        Vector e = Vector::Zero(5);
        e(i) = 1.0;
        basis.push_back(SymMatrix::outer(e));
    }
    CHECK(khintchine_rhs(basis, 2.0) == doctest::Approx(std::sqrt(2.0) * std::sqrt(5.0)));

    std::mt19937_64 rng(21);
    for (int t = 0; t < 10; ++t) {
        std::vector<oracle::Mat> ms;
        std::vector<SymMatrix> as;
        for (int i = 0; i < 4; ++i) {
            ms.push_back(oracle::random_symmetric(4, rng));
            Eigen::MatrixXd e(4, 4);
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) e(r, c) = ms.back()[r][c];
            as.emplace_back(e);
        }
        for (double r : {2.0, 3.0, 8.0}) {
            CHECK(khintchine_rhs(as, r) == doctest::Approx(oracle::khintchine_rhs(ms, r)).epsilon(1e-9));
        }
    }
    CHECK_THROWS_AS(khintchine_rhs(single, 1.5), std::invalid_argument);
}
