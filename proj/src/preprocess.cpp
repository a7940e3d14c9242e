#include "cmcsl/preprocess.hpp"

#include <cmath>

namespace cmcsl {

PreprocessKind parse_preprocess_kind(std::string_view text) {
    if (text == "raw") return PreprocessKind::Raw;
    if (text == "l2") return PreprocessKind::L2;
    if (text == "std") return PreprocessKind::Std;
    if (text == "mm") return PreprocessKind::MinMax;
    if (text == "l2std") return PreprocessKind::L2Std;
    throw InvalidArgument("unknown preprocess kind '" + std::string(text) +
                          "' (expected raw|l2|std|mm|l2std)");
}

std::string_view to_string(PreprocessKind kind) {
    switch (kind) {
        case PreprocessKind::Raw: return "raw";
        case PreprocessKind::L2: return "l2";
        case PreprocessKind::Std: return "std";
        case PreprocessKind::MinMax: return "mm";
        case PreprocessKind::L2Std: return "l2std";
    }
    return "?";
}

Matrix l2_normalize_rows(const Matrix& x) {
    Matrix out = x;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double sq = 0.0;
        for (Eigen::Index j = 0; j < out.cols(); ++j) sq += out(i, j) * out(i, j);
        if (sq > 0.0) {
            const double inv = 1.0 / std::sqrt(sq);
            for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) *= inv;
        }
    }
    return out;
}

namespace {

void fit_std_stats(const Matrix& x, Vector& mean, Vector& stddev) {
    const double n = static_cast<double>(x.rows());
    mean = x.colwise().sum() / n;
    stddev.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double d = x(i, j) - mean(j);
            acc += d * d;
        }
        stddev(j) = std::sqrt(acc / n);
    }
}

}  // namespace

FittedScaler fit_scaler(PreprocessKind kind, const Matrix& fit) {
    if (fit.rows() == 0 || fit.cols() == 0) throw InvalidArgument("fit_scaler: empty fit matrix");
    FittedScaler scaler;
    scaler.kind = kind;
    scaler.dim = fit.cols();
    switch (kind) {
        case PreprocessKind::Raw:
        case PreprocessKind::L2:
            break;
        case PreprocessKind::Std:
            fit_std_stats(fit, scaler.mean, scaler.stddev);
            break;
        case PreprocessKind::MinMax:
            scaler.min = fit.colwise().minCoeff();
            scaler.max = fit.colwise().maxCoeff();
            break;
        case PreprocessKind::L2Std: {
            // Statistics come from the L2-normalized fit data.
            fit_std_stats(l2_normalize_rows(fit), scaler.mean, scaler.stddev);
            break;
        }
    }
    return scaler;
}

Matrix apply_scaler(const FittedScaler& scaler, const Matrix& x) {
    if (x.cols() != scaler.dim)
        throw InvalidArgument("apply_scaler: matrix has " + std::to_string(x.cols()) +
                              " columns, scaler was fitted on " + std::to_string(scaler.dim));
    switch (scaler.kind) {
        case PreprocessKind::Raw:
            return x;
        case PreprocessKind::L2:
            return l2_normalize_rows(x);
        case PreprocessKind::Std:
        case PreprocessKind::L2Std: {
            Matrix out = scaler.kind == PreprocessKind::L2Std ? l2_normalize_rows(x) : x;
            for (Eigen::Index j = 0; j < out.cols(); ++j) {
                const double s = scaler.stddev(j);
                for (Eigen::Index i = 0; i < out.rows(); ++i)
                    out(i, j) = s > 0.0 ? (out(i, j) - scaler.mean(j)) / s : 0.0;
            }
            return out;
        }
        case PreprocessKind::MinMax: {
            Matrix out = x;
            for (Eigen::Index j = 0; j < out.cols(); ++j) {
                const double range = scaler.max(j) - scaler.min(j);
                for (Eigen::Index i = 0; i < out.rows(); ++i)
                    out(i, j) = range > 0.0 ? (out(i, j) - scaler.min(j)) / range : 0.0;
            }
            return out;
        }
    }
    throw InvalidArgument("apply_scaler: unhandled kind");
}

}  // namespace cmcsl
