#pragma once

// Reference computations written without the library's linear algebra, used as
// independent checks in the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t p) { return Mat(p, std::vector<double>(p, 0.0)); }

template <typename EigenLike>
Mat from(const EigenLike& a) {
    const auto p = static_cast<std::size_t>(a.rows());
    Mat m = zeros(p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) m[i][j] = a(static_cast<long>(i), static_cast<long>(j));
    return m;
}

inline Mat add(Mat a, const Mat& b, double s = 1.0) {
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) a[i][j] += s * b[i][j];
    return a;
}

inline Mat mul(const Mat& a, const Mat& b) {
    const std::size_t p = a.size();
    Mat c = zeros(p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < p; ++k)
            for (std::size_t j = 0; j < p; ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

inline Mat hadamard(const Mat& a, const Mat& b) {
    Mat c = a;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) c[i][j] *= b[i][j];
    return c;
}

// Cyclic Jacobi rotations; eigenvalues in ascending order.
inline std::vector<double> jacobi_eigenvalues(Mat a) {
    const std::size_t p = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i + 1; j < p; ++j) off += a[i][j] * a[i][j];
        if (off < 1e-30) break;
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = i + 1; j < p; ++j) {
                if (std::abs(a[i][j]) < 1e-300) continue;
                const double theta = (a[j][j] - a[i][i]) / (2.0 * a[i][j]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < p; ++k) {
                    const double aki = a[k][i], akj = a[k][j];
                    a[k][i] = c * aki - s * akj;
                    a[k][j] = s * aki + c * akj;
                }
                for (std::size_t k = 0; k < p; ++k) {
                    const double aik = a[i][k], ajk = a[j][k];
                    a[i][k] = c * aik - s * ajk;
                    a[j][k] = s * aik + c * ajk;
                }
            }
        }
    }
    std::vector<double> ev(p);
    for (std::size_t i = 0; i < p; ++i) ev[i] = a[i][i];
    std::sort(ev.begin(), ev.end());
    return ev;
}

inline double spectral_norm(const Mat& a) {
    const auto ev = jacobi_eigenvalues(a);
    return std::max(std::abs(ev.front()), std::abs(ev.back()));
}

inline double schatten_power(const Mat& a, double r) {
    double s = 0.0;
    for (double l : jacobi_eigenvalues(a)) s += std::pow(std::abs(l), r);
    return s;
}

inline double max_col_norm(const Mat& a) {
    double best = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i][j] * a[i][j];
        best = std::max(best, std::sqrt(s));
    }
    return best;
}

// (E ||sum_i xi_i A_i||_r^r)^{1/r} by enumerating all 2^k sign vectors.
inline double khintchine_lhs(const std::vector<Mat>& as, double r) {
    const std::size_t k = as.size();
    const std::uint64_t total = std::uint64_t{1} << k;
    double acc = 0.0;
    for (std::uint64_t bits = 0; bits < total; ++bits) {
        Mat s = zeros(as.front().size());
        for (std::size_t i = 0; i < k; ++i) s = add(s, as[i], (bits >> i) & 1U ? -1.0 : 1.0);
        acc += schatten_power(s, r);
    }
    return std::pow(acc / static_cast<double>(total), 1.0 / r);
}

// sqrt(r) ||(sum A_i^2)^{1/2}||_r = sqrt(r) (sum_j lambda_j(sum A_i^2)^{r/2})^{1/r}
inline double khintchine_rhs(const std::vector<Mat>& as, double r) {
    Mat s = zeros(as.front().size());
    for (const auto& a : as) s = add(s, mul(a, a));
    double acc = 0.0;
    for (double l : jacobi_eigenvalues(s)) acc += std::pow(std::max(l, 0.0), r / 2.0);
    return std::sqrt(r) * std::pow(acc, 1.0 / r);
}

// (2m - 1)!!, the 2m-th moment of a standard normal.
inline double normal_even_moment(int m) {
    double v = 1.0;
    for (int k = 2 * m - 1; k > 1; k -= 2) v *= k;
    return v;
}

inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline Mat random_symmetric(std::size_t p, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Mat m = zeros(p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j) m[i][j] = m[j][i] = g(rng);
    return m;
}

}  // namespace oracle
