#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cmcsl/common.hpp"

namespace cmcsl {

/// One feature representation of the shared instances. Rows are instances,
/// columns are (unitless) feature activations.
struct ModalityView {
    std::string name;
    Matrix matrix;

    Eigen::Index rows() const { return matrix.rows(); }
    Eigen::Index dim() const { return matrix.cols(); }
};

/// N instances described by >=2 modality feature matrices plus one shared
/// integer label vector with values in 0..n_classes-1. Instances are aligned
/// across modalities by row index.
struct MultimodalDataset {
    std::string name;
    std::vector<ModalityView> modalities;
    std::vector<int> labels;
    int n_classes = 0;

    Eigen::Index size() const { return static_cast<Eigen::Index>(labels.size()); }

    /// Throws DataError when any structural invariant is violated.
    void validate() const;

    /// Row-subset copy (labels included). Keeps name/n_classes of the parent;
    /// does not re-check that every class survives the cut.
    MultimodalDataset subset(std::span<const int> rows) const;
};

/// A two-fold partition of 0..N-1 with per-class counts differing by at most 1.
struct FoldPair {
    std::vector<int> fold_a;
    std::vector<int> fold_b;
};

struct SyntheticModality {
    std::string name;
    int dim = 0;
    double separation = 0.0;  // pairwise distance between class centers
    double stddev = 1.0;      // isotropic within-class standard deviation
};

struct SyntheticSpec {
    std::string name = "synthetic";
    int n_classes = 0;
    int samples_per_class = 0;
    std::vector<SyntheticModality> modalities;
    std::uint64_t seed = 0;
};

/// Loads a dataset from a JSON manifest referencing one labels file and >=2
/// feature files (paths relative to the manifest). Feature files are CSV with
/// an optional header, or the CMML binary cache; sniffed by magic bytes.
MultimodalDataset load_multimodal(const std::filesystem::path& manifest_path);

/// Writes modality CSVs, the labels CSV and a manifest into out_dir.
/// Returns the manifest path.
std::filesystem::path save_multimodal(const MultimodalDataset& dataset,
                                      const std::filesystem::path& out_dir);

/// Gaussian blobs per class and modality. Class centers sit on one-hot axes
/// scaled so that every pair of centers is exactly `separation` apart; the
/// draw order is fixed by the seed, and labels are shared across modalities.
MultimodalDataset make_synthetic(const SyntheticSpec& spec);

/// Seeded stratified split into two folds. Within each class the members are
/// shuffled, then split in half; an odd class's extra member goes to fold_a
/// for even class ids and fold_b for odd ones.
FoldPair stratified_two_fold(std::span<const int> labels, std::uint64_t rng_seed);

// --- file primitives (exposed for tests and the CLI) ---

Matrix load_feature_matrix(const std::filesystem::path& path);
std::vector<int> load_labels_csv(const std::filesystem::path& path);
void save_matrix_csv(const Matrix& m, const std::filesystem::path& path);

/// Binary cache: magic "CMML", version u8=1, little-endian u32 N, u32 d,
/// then N*d little-endian f64 row-major.
void save_matrix_binary(const Matrix& m, const std::filesystem::path& path);
Matrix load_matrix_binary(const std::filesystem::path& path);

}  // namespace cmcsl
