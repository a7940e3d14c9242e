#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmcsl/common.hpp"
#include "cmcsl/dataset.hpp"
#include "cmcsl/preprocess.hpp"

namespace cmcsl {

/// The pre-labeled instances: b_class per class, drawn uniformly without
/// replacement within each class. They double as fixed cluster centroids.
struct CentroidSeed {
    std::vector<int> indices;  // into the training partition, grouped by class
    std::vector<int> labels;   // centroid j carries labels[j]
    int count() const { return static_cast<int>(indices.size()); }
};

/// One nearest-centroid pass over a single modality: no centroid updates.
struct ClusterAssignment {
    std::vector<int> centroid;     // argmin index per instance
    std::vector<double> distance;  // Euclidean distance to that centroid
};

enum class Provenance : std::uint8_t { Prelabeled, Agreed, Resolved };

struct ProvenanceTag {
    Provenance kind = Provenance::Agreed;
    int modality = -1;  // set for Resolved
};

struct PseudoLabeling {
    std::vector<int> labels;                   // shared cross-modal labels
    std::vector<ProvenanceTag> provenance;     // per instance
    std::vector<std::vector<int>> raw_labels;  // per modality, for diagnostics

    double resolved_fraction() const;
    /// Ascending indices of instances tagged Prelabeled.
    std::vector<int> prelabeled_indices() const;
};

/// Uniform within-class draw of b_class instances per class.
/// Throws InvalidArgument naming the first class with fewer than b_class members.
CentroidSeed select_prelabeled(std::span<const int> labels, int n_classes, int b_class,
                               std::uint64_t rng_seed);

/// Single k-means assignment step: each row of x goes to the centroid at
/// minimum Euclidean distance, ties to the lowest centroid index.
ClusterAssignment assign_clusters(const Matrix& x, const Matrix& centroids);

/// Each instance inherits the label of its assigned centroid.
std::vector<int> propagate_labels(const ClusterAssignment& assignment,
                                  std::span<const int> centroid_labels);

/// Cross-modal agreement: identical raw labels everywhere -> Agreed; on
/// disagreement the label comes from the modality where the instance is
/// closest to its own centroid (ties to the lowest modality index).
PseudoLabeling resolve_cross_modal(const std::vector<std::vector<int>>& raw_labels,
                                   const std::vector<std::vector<double>>& distances);

/// The full self-labeling pass over a training partition: select pre-labeled
/// centroids, preprocess every modality (fit on this partition), assign,
/// propagate, and resolve. Pre-labeled instances keep their true label and
/// are tagged Prelabeled.
PseudoLabeling cmcsl_pseudolabels(const MultimodalDataset& train, int b_class,
                                  PreprocessKind kind, std::uint64_t rng_seed);

/// Same pipeline restricted to one modality: no cross-modal exchange. The
/// centroid draw uses the same seed as cmcsl_pseudolabels so the two can be
/// compared as paired runs.
PseudoLabeling unimodal_pseudolabels(const MultimodalDataset& train, int modality,
                                     int b_class, PreprocessKind kind, std::uint64_t rng_seed);

}  // namespace cmcsl
