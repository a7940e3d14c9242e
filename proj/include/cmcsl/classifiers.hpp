#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "cmcsl/common.hpp"

namespace cmcsl {

enum class ClassifierKind { Gnb, LogisticRegression, Cart };

ClassifierKind parse_classifier_kind(std::string_view text);  // gnb|lr|cart
std::string_view to_string(ClassifierKind kind);

/// A fitted model. predict_proba rows are nonnegative and sum to 1; predict
/// is the row argmax with ties to the lowest class index.
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual Matrix predict_proba(const Matrix& x) const = 0;
    std::vector<int> predict(const Matrix& x) const;
    int n_classes() const { return n_classes_; }
    Eigen::Index dim() const { return dim_; }

protected:
    Classifier(int n_classes, Eigen::Index dim) : n_classes_(n_classes), dim_(dim) {}
    void check_dim(const Matrix& x) const;
    int n_classes_;
    Eigen::Index dim_;
};

/// Gaussian naive Bayes with per-class feature means/variances; variances
/// smoothed by 1e-9 times the largest overall feature variance.
class GnbModel final : public Classifier {
public:
    GnbModel(const Matrix& x, std::span<const int> y, int n_classes);
    Matrix predict_proba(const Matrix& x) const override;

    const Matrix& class_means() const { return means_; }
    const Matrix& class_variances() const { return variances_; }
    const Vector& priors() const { return priors_; }

private:
    Matrix means_;      // n_classes x d
    Matrix variances_;  // smoothed
    Vector priors_;
};

/// Multinomial logistic regression: sum-NLL + 0.5*lambda*||W||^2 (bias
/// unpenalized), minimized by full-batch gradient descent with backtracking
/// line search until the gradient inf-norm drops to 1e-6 or 1000 iterations.
class LogRegModel final : public Classifier {
public:
    LogRegModel(const Matrix& x, std::span<const int> y, int n_classes, double lambda = 1.0);
    Matrix predict_proba(const Matrix& x) const override;

    const Matrix& weights() const { return weights_; }  // n_classes x d
    const Vector& bias() const { return bias_; }
    const std::vector<double>& loss_history() const { return loss_history_; }
    double lambda() const { return lambda_; }

private:
    Matrix weights_;
    Vector bias_;
    double lambda_;
    std::vector<double> loss_history_;
};

/// Objective/gradient of the penalized multinomial logistic loss, exposed so
/// the fitted optimum can be checked against finite differences.
double logreg_objective(const Matrix& weights, const Vector& bias, const Matrix& x,
                        std::span<const int> y, double lambda);
void logreg_gradient(const Matrix& weights, const Vector& bias, const Matrix& x,
                     std::span<const int> y, double lambda, Matrix& grad_w, Vector& grad_b);

/// Gini-impurity decision tree over axis-aligned midpoint thresholds, grown
/// until nodes are pure or featureless. Split ties break toward the lowest
/// feature index, then the lowest threshold.
class CartModel final : public Classifier {
public:
    CartModel(const Matrix& x, std::span<const int> y, int n_classes);
    Matrix predict_proba(const Matrix& x) const override;

    int node_count() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        int feature = -1;        // -1 for leaves
        double threshold = 0.0;  // go left when x[feature] <= threshold
        int left = -1;
        int right = -1;
        Vector probs;  // leaf class frequencies
    };
    int build(const Matrix& x, std::span<const int> y, std::vector<int>& rows);
    std::vector<Node> nodes_;
};

std::unique_ptr<Classifier> fit_classifier(ClassifierKind kind, const Matrix& x,
                                           std::span<const int> y, int n_classes);

enum class FusionMode { Early, Late };

/// EARLY: one classifier over horizontally concatenated modality views.
/// LATE: one classifier per modality; supports are summed before argmax.
class FusionModel {
public:
    static FusionModel fit(FusionMode mode, ClassifierKind kind,
                           const std::vector<Matrix>& views, std::span<const int> y,
                           int n_classes);
    /// Builds a Late fusion from already fitted members (test hook).
    static FusionModel late_from_members(std::vector<std::unique_ptr<Classifier>> members);

    Matrix predict_proba(const std::vector<Matrix>& views) const;
    std::vector<int> predict(const std::vector<Matrix>& views) const;

    FusionMode mode() const { return mode_; }
    const Classifier& member(std::size_t i) const { return *members_[i]; }
    std::size_t member_count() const { return members_.size(); }

private:
    FusionModel() = default;
    FusionMode mode_ = FusionMode::Early;
    std::size_t view_count_ = 0;
    std::vector<std::unique_ptr<Classifier>> members_;
};

Matrix hconcat(const std::vector<Matrix>& views);

}  // namespace cmcsl
