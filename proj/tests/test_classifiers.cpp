#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cmcsl/classifiers.hpp"
#include "cmcsl/rng.hpp"
#include "oracles.hpp"

using namespace cmcsl;

namespace {

// Fixed-output stub for fusion arithmetic tests.
class StubClassifier final : public Classifier {
public:
    StubClassifier(Matrix proba, Eigen::Index dim)
        : Classifier(static_cast<int>(proba.cols()), dim), proba_(std::move(proba)) {}
    Matrix predict_proba(const Matrix&) const override { return proba_; }

private:
    Matrix proba_;
};

}  // namespace

TEST_CASE("gnb separates two 1-D classes") {
    Matrix x(4, 1);
    x << 0, 1, 10, 11;
    const std::vector<int> y = {0, 0, 1, 1};
    const GnbModel model(x, y, 2);

    Matrix q(3, 1);
    q << 0.5, 10.5, 5.25;
    const auto pred = model.predict(q);
    CHECK(pred[0] == 0);
    CHECK(pred[1] == 1);

    const Matrix proba = model.predict_proba(q);
    const Matrix want = oracle::gnb_posterior(x, y, 2, q);
    CHECK((proba - want).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("gnb posterior shape properties") {
    Matrix x(4, 1);
    x << -1, -3, 1, 3;  // symmetric classes around 0
    const std::vector<int> y = {0, 0, 1, 1};
    const GnbModel model(x, y, 2);

    Matrix mid(1, 1);
    mid << 0.0;
    const Matrix p_mid = model.predict_proba(mid);
    CHECK(p_mid(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(p_mid(0, 1) == doctest::Approx(0.5).epsilon(1e-9));

    Matrix far(1, 1);
    far << -50.0;
    const Matrix p_far = model.predict_proba(far);
    CHECK(p_far(0, 0) >= 1.0 - 1e-6);

    rng::Engine rng(3);
    const Matrix q = oracle::random_matrix(rng, 20, 1, -10, 10);
    const Matrix proba = model.predict_proba(q);
    for (Eigen::Index i = 0; i < proba.rows(); ++i) {
        CHECK(proba.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(proba.row(i).minCoeff() >= 0.0);
    }
}

TEST_CASE("gnb matches the Bayes oracle on random problems") {
    rng::Engine rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const int n_classes = 2 + static_cast<int>(rng.bounded(3));
        const int n = n_classes + 3 + static_cast<int>(rng.bounded(97));
        const int d = 1 + static_cast<int>(rng.bounded(5));
        const Matrix x = oracle::random_matrix(rng, n, d, -4, 4);
        const auto y = oracle::random_labels(rng, n, n_classes);
        const GnbModel model(x, y, n_classes);
        const Matrix q = oracle::random_matrix(rng, 10, d, -5, 5);
        const Matrix diff = model.predict_proba(q) - oracle::gnb_posterior(x, y, n_classes, q);
        CHECK(diff.cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("logistic regression fits separable data") {
    Matrix x(6, 1);
    x << -3, -2, -1, 1, 2, 3;
    const std::vector<int> y = {0, 0, 0, 1, 1, 1};
    const LogRegModel model(x, y, 2);
    const auto pred = model.predict(x);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(pred[i] == y[i]);

    // Loss is monotone non-increasing under the line search.
    const auto& history = model.loss_history();
    for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] <= history[i - 1] + 1e-12);
}

TEST_CASE("logistic regression gradient matches finite differences at the optimum") {
    rng::Engine rng(11);
    const Matrix x = oracle::random_matrix(rng, 30, 3, -2, 2);
    const auto y = oracle::random_labels(rng, 30, 3);
    const LogRegModel model(x, y, 3);
    const double diff =
        oracle::logreg_grad_vs_finite_diff(model.weights(), model.bias(), x, y, model.lambda(), 1e-5);
    CHECK(diff <= 1e-4);
}

TEST_CASE("logistic regression puts equal weight on duplicated features") {
    rng::Engine rng(19);
    Matrix base = oracle::random_matrix(rng, 40, 1, -2, 2);
    Matrix x(40, 2);
    x.col(0) = base.col(0);
    x.col(1) = base.col(0);
    std::vector<int> y(40);
    for (int i = 0; i < 40; ++i) y[static_cast<std::size_t>(i)] = base(i, 0) > 0 ? 1 : 0;
    const LogRegModel model(x, y, 2);
    CHECK(std::fabs(model.weights()(0, 0) - model.weights()(0, 1)) <= 1e-6);
    CHECK(std::fabs(model.weights()(1, 0) - model.weights()(1, 1)) <= 1e-6);
}

TEST_CASE("cart solves xor") {
    Matrix x(4, 2);
    x << 0, 0, 1, 1, 0, 1, 1, 0;
    const std::vector<int> y = {0, 0, 1, 1};
    const CartModel model(x, y, 2);
    const auto pred = model.predict(x);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(pred[i] == y[i]);
    CHECK(model.node_count() >= 3);
}

TEST_CASE("cart on pure labels is a single leaf") {
    Matrix x(5, 2);
    x.setRandom();
    const std::vector<int> y = {0, 0, 0, 0, 0};
    const CartModel model(x, y, 1);
    CHECK(model.node_count() == 1);
    const auto pred = model.predict(x);
    for (int p : pred) CHECK(p == 0);
}

TEST_CASE("cart agrees with the exhaustive-split oracle") {
    rng::Engine rng(59);
    for (int trial = 0; trial < 25; ++trial) {
        const int n_classes = 2 + static_cast<int>(rng.bounded(2));
        const int n = n_classes + 5 + static_cast<int>(rng.bounded(45));
        const int d = 1 + static_cast<int>(rng.bounded(4));
        Matrix x = oracle::random_matrix(rng, n, d, -3, 3);
        // Quantize to force duplicate values and split ties.
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = std::round(x(i, j) * 2.0) / 2.0;
        const auto y = oracle::random_labels(rng, n, n_classes);
        const CartModel model(x, y, n_classes);
        CHECK(model.predict(x) == oracle::cart_train_predictions(x, y, n_classes));
    }
}

TEST_CASE("cart training accuracy is perfect when feature vectors are distinct") {
    rng::Engine rng(67);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 20 + static_cast<int>(rng.bounded(30));
        const Matrix x = oracle::random_matrix(rng, n, 3, -5, 5);  // continuous, a.s. distinct
        const auto y = oracle::random_labels(rng, n, 3);
        const CartModel model(x, y, 3);
        CHECK(model.predict(x) == std::vector<int>(y.begin(), y.end()));
    }
}

TEST_CASE("predict equals the argmax of predict_proba") {
    rng::Engine rng(71);
    for (auto kind : {ClassifierKind::Gnb, ClassifierKind::LogisticRegression, ClassifierKind::Cart}) {
        const int n = 30;
        const Matrix x = oracle::random_matrix(rng, n, 3, -2, 2);
        const auto y = oracle::random_labels(rng, n, 3);
        const auto model = fit_classifier(kind, x, y, 3);
        const Matrix q = oracle::random_matrix(rng, 15, 3, -3, 3);
        const Matrix proba = model->predict_proba(q);
        const auto pred = model->predict(q);
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (proba(i, k) > proba(i, best)) best = k;
            CHECK(pred[static_cast<std::size_t>(i)] == best);
        }
    }
}

TEST_CASE("class relabeling permutes predict_proba columns") {
    rng::Engine rng(83);
    const int n = 24;
    const Matrix x = oracle::random_matrix(rng, n, 2, -2, 2);
    const auto y = oracle::random_labels(rng, n, 3);
    const std::vector<int> perm = {2, 0, 1};  // new label of old class k
    std::vector<int> y_perm(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        y_perm[i] = perm[static_cast<std::size_t>(y[i])];
    const Matrix q = oracle::random_matrix(rng, 10, 2, -2, 2);

    for (auto kind : {ClassifierKind::Gnb, ClassifierKind::Cart, ClassifierKind::LogisticRegression}) {
        const auto base = fit_classifier(kind, x, y, 3);
        const auto moved = fit_classifier(kind, x, y_perm, 3);
        const Matrix pa = base->predict_proba(q);
        const Matrix pb = moved->predict_proba(q);
        // LR is iterative with a 1e-6 gradient stop, so its permuted twin can
        // land a solver-tolerance away from the same optimum.
        const double tol = kind == ClassifierKind::LogisticRegression ? 1e-4 : 1e-12;
        for (Eigen::Index i = 0; i < q.rows(); ++i)
            for (int k = 0; k < 3; ++k)
                CHECK(pa(i, k) ==
                      doctest::Approx(pb(i, perm[static_cast<std::size_t>(k)])).epsilon(tol));
    }
}

TEST_CASE("rejects labels missing a class or non-finite features") {
    Matrix x(4, 1);
    x << 0, 1, 2, 3;
    const std::vector<int> y_gap = {0, 0, 2, 2};
    CHECK_THROWS_AS(GnbModel(x, y_gap, 3), InvalidArgument);
    Matrix bad = x;
    bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
    const std::vector<int> y = {0, 0, 1, 1};
    CHECK_THROWS_AS(LogRegModel(bad, y, 2), InvalidArgument);
    CHECK_THROWS_AS(CartModel(bad, y, 2), InvalidArgument);
}

TEST_CASE("late fusion sums member supports before the argmax") {
    Matrix pa(1, 2), pb(1, 2);
    pa << 0.9, 0.1;
    pb << 0.2, 0.8;
    std::vector<std::unique_ptr<Classifier>> members;
    members.push_back(std::make_unique<StubClassifier>(pa, 1));
    members.push_back(std::make_unique<StubClassifier>(pb, 1));
    const auto fusion = FusionModel::late_from_members(std::move(members));
    const std::vector<Matrix> views = {Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
    const Matrix support = fusion.predict_proba(views);
    CHECK(support(0, 0) == doctest::Approx(1.1));
    CHECK(support(0, 1) == doctest::Approx(0.9));
    CHECK(fusion.predict(views)[0] == 0);
}

TEST_CASE("late fusion of identical members matches the member") {
    rng::Engine rng(91);
    const Matrix x = oracle::random_matrix(rng, 30, 2, -2, 2);
    const auto y = oracle::random_labels(rng, 30, 2);
    const std::vector<Matrix> views = {x, x};
    const auto fusion = FusionModel::fit(FusionMode::Late, ClassifierKind::Gnb, views, y, 2);
    const auto solo = fit_classifier(ClassifierKind::Gnb, x, y, 2);
    const Matrix q = oracle::random_matrix(rng, 12, 2, -2, 2);
    CHECK(fusion.predict({q, q}) == solo->predict(q));
}

TEST_CASE("early fusion concatenates 512- and 384-feature views") {
    rng::Engine rng(97);
    const std::vector<Matrix> views = {oracle::random_matrix(rng, 6, 512, -1, 1),
                                       oracle::random_matrix(rng, 6, 384, -1, 1)};
    const std::vector<int> y = {0, 0, 0, 1, 1, 1};
    const auto fusion = FusionModel::fit(FusionMode::Early, ClassifierKind::Gnb, views, y, 2);
    CHECK(fusion.member(0).dim() == 896);
    CHECK_THROWS_AS(fusion.predict({views[0]}), InvalidArgument);
}
