#include "maskcov/estimator.hpp"

#include <stdexcept>

namespace maskcov {

SymMatrix sample_covariance(const SampleSet& s) {
    if (s.n() < 1) throw std::invalid_argument("sample_covariance: empty sample set");
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(s.data.cols(), s.data.cols());
    acc.selfadjointView<Eigen::Lower>().rankUpdate(s.data.transpose());
    acc.triangularView<Eigen::StrictlyUpper>() = acc.transpose();
    acc /= static_cast<double>(s.n());
    return trusted_symmetric(std::move(acc));
}

SymMatrix masked_estimator(const Mask& m, const SampleSet& s, bool centered) {
    if (m.dim() != s.p()) {
        throw std::invalid_argument("masked_estimator: mask is " + std::to_string(m.dim()) +
                                    "x" + std::to_string(m.dim()) + " but samples have p = " +
                                    std::to_string(s.p()));
    }
    return schur_product(m.matrix, sample_covariance(centered ? center_samples(s) : s));
}

ErrorDecomposition decompose_error(const Mask& m, const SymMatrix& sigma, const SampleSet& s,
                                   bool centered) {
    if (sigma.dim() != m.dim()) throw std::invalid_argument("decompose_error: Sigma and mask dimensions differ");
    const SymMatrix estimate = masked_estimator(m, s, centered);
    const SymMatrix masked_sigma = schur_product(m.matrix, sigma);
    ErrorDecomposition out;
    out.variance_term = spectral_norm(estimate - masked_sigma);
    out.bias_term = spectral_norm(masked_sigma - sigma);
    out.total_bound = out.variance_term + out.bias_term;
    out.total_actual = spectral_norm(estimate - sigma);
    return out;
}

double relative_spectral_error(const SymMatrix& estimate, const SymMatrix& target) {
    const double denom = spectral_norm(target);
    if (denom == 0.0) throw std::invalid_argument("relative_spectral_error: target has zero spectral norm");
    return spectral_norm(estimate - target) / denom;
}

}  // namespace maskcov
