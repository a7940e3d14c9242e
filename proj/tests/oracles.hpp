#pragma once

// Independent reference implementations used to check the library. These are
// deliberately written as naive loops, separate from the code paths they
// verify.

#include <span>
#include <vector>

#include "cmcsl/classifiers.hpp"
#include "cmcsl/common.hpp"
#include "cmcsl/propagate.hpp"
#include "cmcsl/rng.hpp"

namespace cmcsl::oracle {

/// Bayes-rule posterior for Gaussian naive Bayes, recomputed from the
/// training data with the same smoothing contract (1e-9 x max feature
/// variance).
Matrix gnb_posterior(const Matrix& x_train, std::span<const int> y_train, int n_classes,
                     const Matrix& query);

/// Exhaustive-split Gini tree with the library's tie rules; returns its
/// predictions on the training set.
std::vector<int> cart_train_predictions(const Matrix& x, std::span<const int> y, int n_classes);

/// Max abs difference between the analytic logistic-regression gradient and
/// central finite differences of the objective at (w, b).
double logreg_grad_vs_finite_diff(const Matrix& w, const Vector& b, const Matrix& x,
                                  std::span<const int> y, double lambda, double step);

/// Rule-following nearest-centroid assignment + propagation + cross-modal
/// resolution over already-preprocessed views.
struct BruteLabeling {
    std::vector<int> labels;
    std::vector<ProvenanceTag> provenance;
    std::vector<std::vector<int>> raw_labels;
};
BruteLabeling cmcsl_bruteforce(const std::vector<Matrix>& views, const CentroidSeed& seed,
                               std::span<const int> true_labels);

/// Exact two-sided Wilcoxon signed-rank p over all 2^m sign assignments.
double wilcoxon_enumeration_p(std::span<const double> x, std::span<const double> y);

/// F(d1, d2) CDF by adaptive Simpson quadrature of the density.
double f_cdf_quadrature(double x, double d1, double d2);

// --- random test-data helpers ---

Matrix random_matrix(rng::Engine& rng, int rows, int cols, double lo, double hi);
/// Labels over 0..n_classes-1 with every class forced present (needs n >= k).
std::vector<int> random_labels(rng::Engine& rng, int n, int n_classes);

}  // namespace cmcsl::oracle
