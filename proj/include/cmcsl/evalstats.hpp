#pragma once

#include <array>
#include <span>
#include <vector>

#include "cmcsl/common.hpp"

namespace cmcsl {

/// Mean of per-class recalls; classes absent from y_true are excluded.
double balanced_accuracy(std::span<const int> y_true, std::span<const int> y_pred, int n_classes);

/// Per-fold scores of two methods on the identical 5x2 CV splits.
struct ScorePair5x2 {
    std::array<std::array<double, 2>, 5> a{};
    std::array<std::array<double, 2>, 5> b{};
};

struct TestOutcome {
    double statistic = 0.0;
    double p_value = 1.0;
    bool significant = false;  // p_value < alpha
};

/// Combined 5x2 CV F-test: F = sum of squared fold differences over twice the
/// sum of per-repeat variances, referred to F(10, 5). Identical scores give
/// (0, 1); zero variance with nonzero differences gives (+inf, 0).
TestOutcome combined_5x2cv_f_test(const ScorePair5x2& pair, double alpha = 0.05);

/// Two-sided Wilcoxon signed-rank test. Zero differences are dropped; ties
/// get average ranks. Exact p by sign enumeration up to 20 effective pairs,
/// then the tie- and continuity-corrected normal approximation.
TestOutcome wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                 double alpha = 0.05);

/// Per dataset (column), methods are ranked 1..M ascending by score so that a
/// higher score earns a higher rank; ties share the average rank. Returns the
/// per-method mean over datasets.
std::vector<double> mean_ranks(const Matrix& scores);  // methods x datasets

// --- distribution plumbing (exposed for the oracle tests) ---

/// Regularized incomplete beta I_x(a, b) by continued fraction, |err| <= 1e-10.
double regularized_incomplete_beta(double a, double b, double x);
double f_distribution_cdf(double x, double d1, double d2);
double normal_cdf(double z);

}  // namespace cmcsl
