#include "maskcov/matrix_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

namespace maskcov {

namespace {

constexpr double kAsymmetryTol = 1e-10;

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void require_same_dim(const SymMatrix& a, const SymMatrix& b, const char* what) {
    if (a.dim() != b.dim()) {
        std::ostringstream msg;
        msg << what << ": dimension mismatch (" << a.dim() << " vs " << b.dim() << ")";
        throw std::invalid_argument(msg.str());
    }
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> decompose(const SymMatrix& a, bool vectors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        a.matrix(), vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("symmetric eigensolver failed to converge (p = " +
                             std::to_string(a.dim()) + ")");
    }
    return solver;
}

}  // namespace

SymMatrix::SymMatrix() : m_(Eigen::MatrixXd::Zero(1, 1)) {}

SymMatrix::SymMatrix(const Eigen::MatrixXd& entries) {
    if (entries.rows() == 0 || entries.rows() != entries.cols()) {
        throw std::invalid_argument("SymMatrix: expected a non-empty square matrix, got " +
                                    std::to_string(entries.rows()) + "x" +
                                    std::to_string(entries.cols()));
    }
    if (!entries.allFinite()) {
        throw std::invalid_argument("SymMatrix: entries must be finite");
    }
    const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
    const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
    if (asym > kAsymmetryTol * scale) {
        std::ostringstream msg;
        msg << "SymMatrix: input is not symmetric (max asymmetry " << asym << ")";
        throw std::invalid_argument(msg.str());
    }
    m_ = 0.5 * (entries + entries.transpose());
}

SymMatrix::SymMatrix(Eigen::MatrixXd entries, Trusted) : m_(std::move(entries)) {
    m_ = 0.5 * (m_ + m_.transpose()).eval();
}

SymMatrix trusted_symmetric(Eigen::MatrixXd entries) {
    return SymMatrix(std::move(entries), SymMatrix::Trusted{});
}

SymMatrix SymMatrix::zeros(std::size_t p) {
    return trusted_symmetric(Eigen::MatrixXd::Zero(idx(p), idx(p)));
}

SymMatrix SymMatrix::identity(std::size_t p) {
    return trusted_symmetric(Eigen::MatrixXd::Identity(idx(p), idx(p)));
}

SymMatrix SymMatrix::ones(std::size_t p) {
    return trusted_symmetric(Eigen::MatrixXd::Ones(idx(p), idx(p)));
}

SymMatrix SymMatrix::diagonal(const Vector& d) {
    if (!d.allFinite()) throw std::invalid_argument("SymMatrix::diagonal: entries must be finite");
    return trusted_symmetric(d.asDiagonal().toDenseMatrix());
}

SymMatrix SymMatrix::outer(const Vector& x) {
    if (!x.allFinite()) throw std::invalid_argument("SymMatrix::outer: entries must be finite");
    return trusted_symmetric(x * x.transpose());
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
    require_same_dim(*this, other, "operator+");
    m_ += other.m_;
    return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& other) {
    require_same_dim(*this, other, "operator-");
    m_ -= other.m_;
    return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
    if (!std::isfinite(s)) throw std::invalid_argument("SymMatrix: scale must be finite");
    m_ *= s;
    return *this;
}

Vector eigenvalues(const SymMatrix& a) { return decompose(a, false).eigenvalues(); }

SymMatrix schur_product(const SymMatrix& a, const SymMatrix& b) {
    require_same_dim(a, b, "schur_product");
    return trusted_symmetric(a.matrix().cwiseProduct(b.matrix()));
}

SymMatrix square(const SymMatrix& a) { return trusted_symmetric(a.matrix() * a.matrix()); }

double spectral_norm(const SymMatrix& a) {
    const Vector ev = eigenvalues(a);
    return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

double schatten_norm(const SymMatrix& a, double q) {
    if (!(q >= 1.0) || !std::isfinite(q)) {
        throw std::invalid_argument("schatten_norm: q must be a finite real >= 1");
    }
    const Vector ev = eigenvalues(a).cwiseAbs();
    const double top = ev.maxCoeff();
    if (top == 0.0) return 0.0;
    // Normalize by the largest eigenvalue so large q does not overflow.
    double sum = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) sum += std::pow(ev(i) / top, q);
    return top * std::pow(sum, 1.0 / q);
}

double one_to_two_norm(const SymMatrix& a) { return a.matrix().colwise().norm().maxCoeff(); }

double max_norm(const SymMatrix& a) { return a.matrix().cwiseAbs().maxCoeff(); }

double gershgorin_column_bound(const SymMatrix& a) {
    return a.matrix().cwiseAbs().colwise().sum().maxCoeff();
}

bool is_psd(const SymMatrix& a, double tol) {
    const Vector ev = eigenvalues(a);
    const double norm = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    return ev(0) >= -tol * std::max(1.0, norm);
}

bool psd_order_leq(const SymMatrix& a, const SymMatrix& b, double tol) {
    return is_psd(b - a, tol);
}

SymMatrix psd_sqrt(const SymMatrix& a, double tol) {
    const auto solver = decompose(a, true);
    Vector ev = solver.eigenvalues();
    const double norm = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    if (ev(0) < -tol * std::max(1.0, norm)) {
        std::ostringstream msg;
        msg << "psd_sqrt: matrix is not positive semidefinite (lambda_min = " << ev(0) << ")";
        throw std::invalid_argument(msg.str());
    }
    ev = ev.cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd& v = solver.eigenvectors();
    return trusted_symmetric(v * ev.asDiagonal() * v.transpose());
}

namespace {

SymMatrix read_one(std::istream& in) {
    long long p = 0;
    if (!(in >> p) || p < 1) {
        throw std::invalid_argument("matrix file: first token must be a positive dimension");
    }
    Eigen::MatrixXd m(p, p);
    for (long long i = 0; i < p; ++i) {
        for (long long j = 0; j < p; ++j) {
            if (!(in >> m(i, j))) {
                std::ostringstream msg;
                msg << "matrix file: expected " << p * p << " entries, parse failed at row "
                    << i + 1 << " column " << j + 1;
                throw std::invalid_argument(msg.str());
            }
        }
    }
    return SymMatrix(m);
}

}  // namespace

SymMatrix read_matrix(std::istream& in) {
    SymMatrix m = read_one(in);
    std::string extra;
    if (in >> extra) throw std::invalid_argument("matrix file: trailing data after matrix");
    return m;
}

std::vector<SymMatrix> read_matrix_list(std::istream& in) {
    std::vector<SymMatrix> out;
    in >> std::ws;
    while (in.peek() != std::char_traits<char>::eof()) {
        out.push_back(read_one(in));
        in >> std::ws;
    }
    if (out.empty()) throw std::invalid_argument("matrix list: no matrices found");
    return out;
}

SymMatrix read_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open matrix file '" + path + "'");
    return read_matrix(in);
}

void write_matrix(std::ostream& out, const SymMatrix& a) {
    const auto p = a.dim();
    out << p << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            if (j) out << ' ';
            out << a(i, j);
        }
        out << '\n';
    }
}

}  // namespace maskcov
