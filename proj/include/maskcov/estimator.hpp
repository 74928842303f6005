#pragma once

// Sample covariance, the masked estimator and its error functionals.

#include "maskcov/masks.hpp"
#include "maskcov/matrix_core.hpp"
#include "maskcov/models.hpp"

namespace maskcov {

/// Spectral-norm split of the masked estimator error against the true Sigma.
///
///   variance_term = ||M o S_n - M o Sigma||
///   bias_term     = ||M o Sigma - Sigma||
///   total_bound   = variance_term + bias_term
///   total_actual  = ||M o S_n - Sigma||  (<= total_bound)
struct ErrorDecomposition {
    double variance_term = 0.0;
    double bias_term = 0.0;
    double total_bound = 0.0;
    double total_actual = 0.0;
};

/// n^{-1} sum_k x_k x_k^T. Not mean-centered.
SymMatrix sample_covariance(const SampleSet& s);

/// M o S_n, computed from mean-centered samples when `centered` is set.
SymMatrix masked_estimator(const Mask& m, const SampleSet& s, bool centered = false);

ErrorDecomposition decompose_error(const Mask& m, const SymMatrix& sigma, const SampleSet& s,
                                   bool centered = false);

/// ||estimate - target|| / ||target||. Throws when the target has zero norm.
double relative_spectral_error(const SymMatrix& estimate, const SymMatrix& target);

}  // namespace maskcov
