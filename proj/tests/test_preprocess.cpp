#include <doctest.h>

#include <cmath>

#include "cmcsl/preprocess.hpp"
#include "cmcsl/rng.hpp"
#include "oracles.hpp"

using namespace cmcsl;

TEST_CASE("l2_normalize_rows") {
    Matrix x(3, 2);
    x << 3, 4, 0, 0, 1, 1;
    const Matrix out = l2_normalize_rows(x);
    CHECK(out(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(out(0, 1) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(out(1, 0) == 0.0);  // zero row unchanged
    CHECK(out(1, 1) == 0.0);
    CHECK(out(2, 0) == doctest::Approx(0.70710678).epsilon(1e-7));
    CHECK(out(2, 1) == doctest::Approx(0.70710678).epsilon(1e-7));
}

TEST_CASE("fit_scaler stores the contract statistics") {
    Matrix col(3, 1);
    col << 1, 2, 3;
    SUBCASE("std uses the population deviation") {
        const auto scaler = fit_scaler(PreprocessKind::Std, col);
        CHECK(scaler.mean(0) == doctest::Approx(2.0));
        CHECK(scaler.stddev(0) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    }
    SUBCASE("minmax stores extrema") {
        Matrix c2(3, 1);
        c2 << 2, 4, 6;
        const auto scaler = fit_scaler(PreprocessKind::MinMax, c2);
        CHECK(scaler.min(0) == 2.0);
        CHECK(scaler.max(0) == 6.0);
    }
    SUBCASE("raw stores nothing") {
        const auto scaler = fit_scaler(PreprocessKind::Raw, col);
        CHECK(scaler.mean.size() == 0);
        CHECK(scaler.min.size() == 0);
    }
}

TEST_CASE("apply_scaler per kind") {
    SUBCASE("std on its own fit set") {
        Matrix col(3, 1);
        col << 1, 2, 3;
        const Matrix out = apply_scaler(fit_scaler(PreprocessKind::Std, col), col);
        CHECK(out(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
        CHECK(out(1, 0) == doctest::Approx(0.0));
        CHECK(out(2, 0) == doctest::Approx(1.2247).epsilon(1e-4));
    }
    SUBCASE("minmax on its own fit set") {
        Matrix col(3, 1);
        col << 2, 4, 6;
        const Matrix out = apply_scaler(fit_scaler(PreprocessKind::MinMax, col), col);
        CHECK(out(0, 0) == 0.0);
        CHECK(out(1, 0) == 0.5);
        CHECK(out(2, 0) == 1.0);
    }
    SUBCASE("l2std maps colinear rows to zero columns") {
        Matrix x(2, 2);
        x << 3, 4, 6, 8;
        const Matrix out = apply_scaler(fit_scaler(PreprocessKind::L2Std, x), x);
        CHECK(out.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("dimension mismatch is rejected") {
        Matrix x(2, 2);
        x << 1, 2, 3, 4;
        Matrix other(2, 3);
        other.setZero();
        CHECK_THROWS_AS(apply_scaler(fit_scaler(PreprocessKind::Std, x), other), InvalidArgument);
    }
}

TEST_CASE("preprocessing invariants over random matrices") {
    rng::Engine rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int rows = 2 + static_cast<int>(rng.bounded(20));
        const int cols = 1 + static_cast<int>(rng.bounded(6));
        Matrix x = oracle::random_matrix(rng, rows, cols, -5.0, 5.0);
        if (trial % 4 == 0) x.col(0).setConstant(1.5);  // constant column
        if (trial % 5 == 0) x.row(0).setZero();         // zero row

        const Matrix l2 = l2_normalize_rows(x);
        for (Eigen::Index i = 0; i < l2.rows(); ++i) {
            const double norm = l2.row(i).norm();
            if (x.row(i).norm() > 0.0) CHECK(std::fabs(norm - 1.0) <= 1e-9);
            else CHECK(norm == 0.0);
        }
        // Idempotence.
        CHECK((l2_normalize_rows(l2) - l2).cwiseAbs().maxCoeff() <= 1e-12);

        const Matrix std_out = apply_scaler(fit_scaler(PreprocessKind::Std, x), x);
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double col_min = x.col(j).minCoeff();
            const double col_max = x.col(j).maxCoeff();
            const bool constant = col_min == col_max;
            const double mean = std_out.col(j).mean();
            double var = 0.0;
            for (Eigen::Index i = 0; i < rows; ++i)
                var += (std_out(i, j) - mean) * (std_out(i, j) - mean);
            var /= static_cast<double>(rows);
            if (constant) {
                CHECK(std_out.col(j).cwiseAbs().maxCoeff() == 0.0);
            } else {
                CHECK(std::fabs(mean) <= 1e-9);
                CHECK(std::fabs(std::sqrt(var) - 1.0) <= 1e-9);
            }
        }

        const Matrix mm_out = apply_scaler(fit_scaler(PreprocessKind::MinMax, x), x);
        for (Eigen::Index j = 0; j < cols; ++j) {
            const bool constant = x.col(j).minCoeff() == x.col(j).maxCoeff();
            if (constant) {
                CHECK(mm_out.col(j).cwiseAbs().maxCoeff() == 0.0);
            } else {
                CHECK(std::fabs(mm_out.col(j).minCoeff()) <= 1e-12);
                CHECK(std::fabs(mm_out.col(j).maxCoeff() - 1.0) <= 1e-12);
            }
        }

        // Raw is the identity bit for bit.
        const Matrix raw_out = apply_scaler(fit_scaler(PreprocessKind::Raw, x), x);
        CHECK((raw_out - x).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("preprocess kind names round-trip") {
    for (auto kind : {PreprocessKind::Raw, PreprocessKind::L2, PreprocessKind::Std,
                      PreprocessKind::MinMax, PreprocessKind::L2Std})
        CHECK(parse_preprocess_kind(to_string(kind)) == kind);
    CHECK_THROWS_AS(parse_preprocess_kind("zscore"), InvalidArgument);
}
