#pragma once

// Dense real symmetric matrices and the norms used throughout maskcov.

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace maskcov {

using Vector = Eigen::VectorXd;

/// Raised when an eigendecomposition does not converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense p x p real symmetric matrix with finite entries.
///
/// Construction averages the input with its transpose. Inputs whose largest
/// asymmetry exceeds 1e-10 * max(1, max|entry|) are rejected, so every
/// SymMatrix is exactly symmetric and nothing downstream re-checks it.
class SymMatrix {
public:
    /// 1 x 1 zero matrix.
    SymMatrix();
    explicit SymMatrix(const Eigen::MatrixXd& entries);

    static SymMatrix zeros(std::size_t p);
    static SymMatrix identity(std::size_t p);
    static SymMatrix ones(std::size_t p);
    static SymMatrix diagonal(const Vector& d);
    static SymMatrix outer(const Vector& x);

    std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
    double operator()(std::size_t i, std::size_t j) const {
        return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    const Eigen::MatrixXd& matrix() const { return m_; }

    SymMatrix& operator+=(const SymMatrix& other);
    SymMatrix& operator-=(const SymMatrix& other);
    SymMatrix& operator*=(double s);

    friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
    friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
    friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
    friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
    friend bool operator==(const SymMatrix& a, const SymMatrix& b) { return a.m_ == b.m_; }

private:
    struct Trusted {};
    SymMatrix(Eigen::MatrixXd entries, Trusted);
    friend SymMatrix trusted_symmetric(Eigen::MatrixXd entries);

    Eigen::MatrixXd m_;
};

/// Wraps an Eigen matrix known to be symmetric up to rounding (A*A, A+B, ...).
/// Symmetrizes by averaging but skips the rejection threshold.
SymMatrix trusted_symmetric(Eigen::MatrixXd entries);

/// Eigenvalues in ascending order.
Vector eigenvalues(const SymMatrix& a);

/// Entrywise (Schur/Hadamard) product.
SymMatrix schur_product(const SymMatrix& a, const SymMatrix& b);

/// a * a, which is symmetric.
SymMatrix square(const SymMatrix& a);

/// Largest absolute eigenvalue.
double spectral_norm(const SymMatrix& a);

/// (sum_i |lambda_i|^q)^(1/q) for real q >= 1.
double schatten_norm(const SymMatrix& a, double q);

/// Largest Euclidean column norm.
double one_to_two_norm(const SymMatrix& a);

/// Largest absolute entry.
double max_norm(const SymMatrix& a);

/// Largest column l1 norm. Always dominates the spectral norm.
double gershgorin_column_bound(const SymMatrix& a);

/// lambda_min(a) >= -tol * max(1, ||a||).
bool is_psd(const SymMatrix& a, double tol = 1e-9);

/// a <= b in the semidefinite order, i.e. b - a is PSD.
bool psd_order_leq(const SymMatrix& a, const SymMatrix& b, double tol = 1e-9);

/// Symmetric PSD square root. Eigenvalues in [-tol * max(1, ||a||), 0) are
/// clamped to zero; anything more negative throws std::invalid_argument.
SymMatrix psd_sqrt(const SymMatrix& a, double tol = 1e-9);

// Dense text format: first line p, then p rows of p numbers.
SymMatrix read_matrix(std::istream& in);
SymMatrix read_matrix_file(const std::string& path);
/// Consecutive matrices in the dense format, until end of stream.
std::vector<SymMatrix> read_matrix_list(std::istream& in);
void write_matrix(std::ostream& out, const SymMatrix& a);

}  // namespace maskcov
