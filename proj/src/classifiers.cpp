#include "cmcsl/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cmcsl {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2*pi)

void check_training_input(const Matrix& x, std::span<const int> y, int n_classes) {
    if (x.rows() == 0 || x.cols() == 0) throw InvalidArgument("fit: empty training matrix");
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw InvalidArgument("fit: row/label count mismatch");
    if (!x.allFinite()) throw InvalidArgument("fit: non-finite feature value");
    std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
    for (int label : y) {
        if (label < 0 || label >= n_classes)
            throw InvalidArgument("fit: label " + std::to_string(label) + " outside 0.." +
                                  std::to_string(n_classes - 1));
        seen[static_cast<std::size_t>(label)] = true;
    }
    for (int k = 0; k < n_classes; ++k)
        if (!seen[static_cast<std::size_t>(k)])
            throw InvalidArgument("fit: class " + std::to_string(k) + " absent from training labels");
}

// Row-wise exp-normalize of log-scores, stabilized by the row max. A row
// whose every entry is -inf falls back to the uniform distribution.
Matrix lognorm_rows(Matrix logs) {
    const int k = static_cast<int>(logs.cols());
    for (Eigen::Index i = 0; i < logs.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < k; ++j) mx = std::max(mx, logs(i, j));
        if (!std::isfinite(mx)) {
            for (Eigen::Index j = 0; j < k; ++j) logs(i, j) = 1.0 / k;
            continue;
        }
        double sum = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            logs(i, j) = std::exp(logs(i, j) - mx);
            sum += logs(i, j);
        }
        for (Eigen::Index j = 0; j < k; ++j) logs(i, j) /= sum;
    }
    return logs;
}

}  // namespace

ClassifierKind parse_classifier_kind(std::string_view text) {
    if (text == "gnb") return ClassifierKind::Gnb;
    if (text == "lr") return ClassifierKind::LogisticRegression;
    if (text == "cart") return ClassifierKind::Cart;
    throw InvalidArgument("unknown classifier '" + std::string(text) + "' (expected gnb|lr|cart)");
}

std::string_view to_string(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::Gnb: return "gnb";
        case ClassifierKind::LogisticRegression: return "lr";
        case ClassifierKind::Cart: return "cart";
    }
    return "?";
}

void Classifier::check_dim(const Matrix& x) const {
    if (x.cols() != dim_)
        throw InvalidArgument("predict: matrix has " + std::to_string(x.cols()) +
                              " features, model expects " + std::to_string(dim_));
}

std::vector<int> Classifier::predict(const Matrix& x) const {
    const Matrix proba = predict_proba(x);
    std::vector<int> out(static_cast<std::size_t>(proba.rows()));
    for (Eigen::Index i = 0; i < proba.rows(); ++i) {
        int best = 0;
        for (Eigen::Index j = 1; j < proba.cols(); ++j)
            if (proba(i, j) > proba(i, best)) best = static_cast<int>(j);
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

// --- Gaussian naive Bayes ---

GnbModel::GnbModel(const Matrix& x, std::span<const int> y, int n_classes)
    : Classifier(n_classes, x.cols()) {
    check_training_input(x, y, n_classes);
    const Eigen::Index d = x.cols();
    means_ = Matrix::Zero(n_classes, d);
    variances_ = Matrix::Zero(n_classes, d);
    priors_ = Vector::Zero(n_classes);

    std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        counts[static_cast<std::size_t>(y[i])] += 1.0;
        means_.row(y[i]) += x.row(static_cast<Eigen::Index>(i));
    }
    for (int k = 0; k < n_classes; ++k) means_.row(k) /= counts[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto diff = x.row(static_cast<Eigen::Index>(i)) - means_.row(y[i]);
        variances_.row(y[i]) += diff.cwiseProduct(diff);
    }
    for (int k = 0; k < n_classes; ++k) {
        variances_.row(k) /= counts[static_cast<std::size_t>(k)];
        priors_(k) = counts[static_cast<std::size_t>(k)] / static_cast<double>(y.size());
    }

    // Smoothing scale: largest population variance across all features.
    double max_var = 0.0;
    const Vector overall_mean = x.colwise().mean();
    for (Eigen::Index j = 0; j < d; ++j) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double diff = x(i, j) - overall_mean(j);
            acc += diff * diff;
        }
        max_var = std::max(max_var, acc / static_cast<double>(x.rows()));
    }
    variances_.array() += 1e-9 * max_var;
}

Matrix GnbModel::predict_proba(const Matrix& x) const {
    check_dim(x);
    Matrix logs(x.rows(), n_classes_);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (int k = 0; k < n_classes_; ++k) {
            double ll = std::log(priors_(k));
            for (Eigen::Index j = 0; j < dim_; ++j) {
                const double v = variances_(k, j);
                const double diff = x(i, j) - means_(k, j);
                ll += -0.5 * (kLogTwoPi + std::log(v)) - diff * diff / (2.0 * v);
            }
            logs(i, k) = ll;
        }
    }
    return lognorm_rows(std::move(logs));
}

// --- logistic regression ---

double logreg_objective(const Matrix& weights, const Vector& bias, const Matrix& x,
                        std::span<const int> y, double lambda) {
    double nll = 0.0;
    const int k = static_cast<int>(weights.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Vector z = weights * x.row(i).transpose() + bias;
        const double mx = z.maxCoeff();
        double sum = 0.0;
        for (int c = 0; c < k; ++c) sum += std::exp(z(c) - mx);
        nll += -(z(y[static_cast<std::size_t>(i)]) - mx - std::log(sum));
    }
    return nll + 0.5 * lambda * weights.squaredNorm();
}

void logreg_gradient(const Matrix& weights, const Vector& bias, const Matrix& x,
                     std::span<const int> y, double lambda, Matrix& grad_w, Vector& grad_b) {
    const int k = static_cast<int>(weights.rows());
    grad_w = lambda * weights;
    grad_b = Vector::Zero(k);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Vector z = weights * x.row(i).transpose() + bias;
        const double mx = z.maxCoeff();
        double sum = 0.0;
        for (int c = 0; c < k; ++c) {
            z(c) = std::exp(z(c) - mx);
            sum += z(c);
        }
        z /= sum;  // softmax row
        z(y[static_cast<std::size_t>(i)]) -= 1.0;
        grad_w += z * x.row(i);
        grad_b += z;
    }
}

LogRegModel::LogRegModel(const Matrix& x, std::span<const int> y, int n_classes, double lambda)
    : Classifier(n_classes, x.cols()), lambda_(lambda) {
    check_training_input(x, y, n_classes);
    weights_ = Matrix::Zero(n_classes, x.cols());
    bias_ = Vector::Zero(n_classes);

    constexpr int kMaxIter = 1000;
    constexpr double kGradTol = 1e-6;
    constexpr double kArmijo = 1e-4;

    double loss = logreg_objective(weights_, bias_, x, y, lambda_);
    loss_history_.push_back(loss);
    Matrix grad_w;
    Vector grad_b;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        logreg_gradient(weights_, bias_, x, y, lambda_, grad_w, grad_b);
        const double inf_norm =
            std::max(grad_w.cwiseAbs().maxCoeff(), grad_b.cwiseAbs().maxCoeff());
        if (inf_norm <= kGradTol) break;
        const double sq = grad_w.squaredNorm() + grad_b.squaredNorm();
        double step = 1.0;
        for (int halvings = 0; halvings < 64; ++halvings) {
            const Matrix w_try = weights_ - step * grad_w;
            const Vector b_try = bias_ - step * grad_b;
            const double loss_try = logreg_objective(w_try, b_try, x, y, lambda_);
            if (loss_try <= loss - kArmijo * step * sq) {
                weights_ = w_try;
                bias_ = b_try;
                loss = loss_try;
                break;
            }
            step *= 0.5;
        }
        loss_history_.push_back(loss);
    }
}

Matrix LogRegModel::predict_proba(const Matrix& x) const {
    check_dim(x);
    Matrix logs = x * weights_.transpose();
    logs.rowwise() += bias_.transpose();
    return lognorm_rows(std::move(logs));
}

// --- CART ---

namespace {

// Split quality in count space: sum over children of sum_k count_k^2 / n_child.
// Larger is better; equal values stay bit-identical because the counts are
// small integers.
double partition_score(const std::vector<double>& counts, double n) {
    double acc = 0.0;
    for (double c : counts) acc += c * c;
    return acc / n;
}

}  // namespace

CartModel::CartModel(const Matrix& x, std::span<const int> y, int n_classes)
    : Classifier(n_classes, x.cols()) {
    check_training_input(x, y, n_classes);
    std::vector<int> rows(static_cast<std::size_t>(x.rows()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    build(x, y, rows);
}

int CartModel::build(const Matrix& x, std::span<const int> y, std::vector<int>& rows) {
    const double n = static_cast<double>(rows.size());
    std::vector<double> counts(static_cast<std::size_t>(n_classes_), 0.0);
    for (int r : rows) counts[static_cast<std::size_t>(y[static_cast<std::size_t>(r)])] += 1.0;

    const bool pure = std::count_if(counts.begin(), counts.end(),
                                    [](double c) { return c > 0.0; }) == 1;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = -1.0;
    if (!pure) {
        std::vector<std::pair<double, int>> order(rows.size());
        for (Eigen::Index j = 0; j < dim_; ++j) {
            for (std::size_t i = 0; i < rows.size(); ++i)
                order[i] = {x(rows[i], j), y[static_cast<std::size_t>(rows[i])]};
            std::sort(order.begin(), order.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            std::vector<double> left(static_cast<std::size_t>(n_classes_), 0.0);
            std::vector<double> right = counts;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                left[static_cast<std::size_t>(order[i].second)] += 1.0;
                right[static_cast<std::size_t>(order[i].second)] -= 1.0;
                if (order[i].first == order[i + 1].first) continue;
                const double threshold = order[i].first + 0.5 * (order[i + 1].first - order[i].first);
                const double score = partition_score(left, static_cast<double>(i + 1)) +
                                     partition_score(right, static_cast<double>(order.size() - i - 1));
                // An impure node with any non-constant feature always splits;
                // zero-gain splits are allowed, which is what untangles
                // XOR-like data. Strict > keeps the first of tied candidates,
                // i.e. the lowest feature index, then the lowest threshold.
                if (score > best_score) {
                    best_score = score;
                    best_feature = static_cast<int>(j);
                    best_threshold = threshold;
                }
            }
        }
    }

    const int node_id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    if (best_feature < 0) {
        Node& leaf = nodes_[static_cast<std::size_t>(node_id)];
        leaf.probs = Vector::Zero(n_classes_);
        for (int k = 0; k < n_classes_; ++k) leaf.probs(k) = counts[static_cast<std::size_t>(k)] / n;
        return node_id;
    }

    std::vector<int> left_rows, right_rows;
    for (int r : rows)
        (x(r, best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int left_id = build(x, y, left_rows);
    const int right_id = build(x, y, right_rows);
    Node& node = nodes_[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = right_id;
    return node_id;
}

Matrix CartModel::predict_proba(const Matrix& x) const {
    check_dim(x);
    Matrix out(x.rows(), n_classes_);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        int node = 0;
        while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
            const Node& n = nodes_[static_cast<std::size_t>(node)];
            node = x(i, n.feature) <= n.threshold ? n.left : n.right;
        }
        out.row(i) = nodes_[static_cast<std::size_t>(node)].probs.transpose();
    }
    return out;
}

std::unique_ptr<Classifier> fit_classifier(ClassifierKind kind, const Matrix& x,
                                           std::span<const int> y, int n_classes) {
    switch (kind) {
        case ClassifierKind::Gnb: return std::make_unique<GnbModel>(x, y, n_classes);
        case ClassifierKind::LogisticRegression: return std::make_unique<LogRegModel>(x, y, n_classes);
        case ClassifierKind::Cart: return std::make_unique<CartModel>(x, y, n_classes);
    }
    throw InvalidArgument("fit_classifier: unhandled kind");
}

// --- fusion ---

Matrix hconcat(const std::vector<Matrix>& views) {
    if (views.empty()) throw InvalidArgument("hconcat: no views");
    Eigen::Index cols = 0;
    for (const auto& v : views) {
        if (v.rows() != views.front().rows()) throw InvalidArgument("hconcat: row count mismatch");
        cols += v.cols();
    }
    Matrix out(views.front().rows(), cols);
    Eigen::Index offset = 0;
    for (const auto& v : views) {
        out.middleCols(offset, v.cols()) = v;
        offset += v.cols();
    }
    return out;
}

FusionModel FusionModel::fit(FusionMode mode, ClassifierKind kind,
                             const std::vector<Matrix>& views, std::span<const int> y,
                             int n_classes) {
    if (views.empty()) throw InvalidArgument("fusion_fit: no views");
    FusionModel model;
    model.mode_ = mode;
    model.view_count_ = views.size();
    if (mode == FusionMode::Early) {
        model.members_.push_back(fit_classifier(kind, hconcat(views), y, n_classes));
    } else {
        for (const auto& view : views)
            model.members_.push_back(fit_classifier(kind, view, y, n_classes));
    }
    return model;
}

FusionModel FusionModel::late_from_members(std::vector<std::unique_ptr<Classifier>> members) {
    if (members.empty()) throw InvalidArgument("late_from_members: no members");
    FusionModel model;
    model.mode_ = FusionMode::Late;
    model.view_count_ = members.size();
    model.members_ = std::move(members);
    return model;
}

Matrix FusionModel::predict_proba(const std::vector<Matrix>& views) const {
    if (views.size() != view_count_)
        throw InvalidArgument("fusion predict: expected " + std::to_string(view_count_) +
                              " views, got " + std::to_string(views.size()));
    if (mode_ == FusionMode::Early) return members_.front()->predict_proba(hconcat(views));
    // Support accumulation: members' probabilities summed before argmax.
    Matrix acc = members_.front()->predict_proba(views.front());
    for (std::size_t m = 1; m < members_.size(); ++m)
        acc += members_[m]->predict_proba(views[m]);
    return acc;
}

std::vector<int> FusionModel::predict(const std::vector<Matrix>& views) const {
    const Matrix support = predict_proba(views);
    std::vector<int> out(static_cast<std::size_t>(support.rows()));
    for (Eigen::Index i = 0; i < support.rows(); ++i) {
        int best = 0;
        for (Eigen::Index j = 1; j < support.cols(); ++j)
            if (support(i, j) > support(i, best)) best = static_cast<int>(j);
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

}  // namespace cmcsl
