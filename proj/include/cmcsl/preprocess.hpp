#pragma once

#include <string>
#include <string_view>

#include "cmcsl/common.hpp"

namespace cmcsl {

/// The per-modality feature rescaling applied before distance-based
/// propagation, to make the modality spaces comparable.
enum class PreprocessKind { Raw, L2, Std, MinMax, L2Std };

PreprocessKind parse_preprocess_kind(std::string_view text);  // raw|l2|std|mm|l2std
std::string_view to_string(PreprocessKind kind);

/// Scales every nonzero row to unit Euclidean norm; zero rows pass through.
Matrix l2_normalize_rows(const Matrix& x);

/// Column statistics estimated once on the training matrix, then applied to
/// any matrix with the same feature count.
struct FittedScaler {
    PreprocessKind kind = PreprocessKind::Raw;
    Eigen::Index dim = 0;
    Vector mean;    // Std / L2Std
    Vector stddev;  // population (divide-by-N) standard deviation
    Vector min;     // MinMax
    Vector max;
};

FittedScaler fit_scaler(PreprocessKind kind, const Matrix& fit);
Matrix apply_scaler(const FittedScaler& scaler, const Matrix& x);

}  // namespace cmcsl
