#include "cmcsl/propagate.hpp"

#include <algorithm>
#include <cmath>

#include "cmcsl/rng.hpp"

namespace cmcsl {

double PseudoLabeling::resolved_fraction() const {
    if (labels.empty()) return 0.0;
    std::size_t resolved = 0;
    for (const auto& tag : provenance)
        if (tag.kind == Provenance::Resolved) ++resolved;
    return static_cast<double>(resolved) / static_cast<double>(labels.size());
}

std::vector<int> PseudoLabeling::prelabeled_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < provenance.size(); ++i)
        if (provenance[i].kind == Provenance::Prelabeled) out.push_back(static_cast<int>(i));
    return out;
}

CentroidSeed select_prelabeled(std::span<const int> labels, int n_classes, int b_class,
                               std::uint64_t rng_seed) {
    if (b_class < 1) throw InvalidArgument("select_prelabeled: b_class must be >= 1");
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= n_classes)
            throw InvalidArgument("select_prelabeled: label " + std::to_string(y) + " out of range");
        by_class[static_cast<std::size_t>(y)].push_back(static_cast<int>(i));
    }
    for (int k = 0; k < n_classes; ++k) {
        const auto sz = by_class[static_cast<std::size_t>(k)].size();
        if (sz < static_cast<std::size_t>(b_class))
            throw InvalidArgument("select_prelabeled: class " + std::to_string(k) + " has " +
                                  std::to_string(sz) + " member(s), budget needs " +
                                  std::to_string(b_class));
    }

    rng::Engine rng(rng_seed);
    CentroidSeed seed;
    seed.indices.reserve(static_cast<std::size_t>(n_classes) * b_class);
    seed.labels.reserve(seed.indices.capacity());
    for (int k = 0; k < n_classes; ++k) {
        auto& members = by_class[static_cast<std::size_t>(k)];
        // Partial Fisher-Yates: the first b_class slots are a uniform draw
        // without replacement.
        for (int i = 0; i < b_class; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.bounded(members.size() - i));
            std::swap(members[static_cast<std::size_t>(i)], members[j]);
            seed.indices.push_back(members[static_cast<std::size_t>(i)]);
            seed.labels.push_back(k);
        }
    }
    return seed;
}

ClusterAssignment assign_clusters(const Matrix& x, const Matrix& centroids) {
    if (x.cols() != centroids.cols())
        throw InvalidArgument("assign_clusters: dimensionality mismatch");
    const Eigen::Index n = x.rows();
    const Eigen::Index c = centroids.rows();
    ClusterAssignment out;
    out.centroid.resize(static_cast<std::size_t>(n));
    out.distance.resize(static_cast<std::size_t>(n));
    // Plain left-to-right summation; keeps distances reproducible against a
    // naive reference loop.
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_sq = 0.0;
        for (Eigen::Index k = 0; k < c; ++k) {
            double sq = 0.0;
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                const double d = x(i, j) - centroids(k, j);
                sq += d * d;
            }
            if (k == 0 || sq < best_sq) {
                best_sq = sq;
                best = static_cast<int>(k);
            }
        }
        out.centroid[static_cast<std::size_t>(i)] = best;
        out.distance[static_cast<std::size_t>(i)] = std::sqrt(best_sq);
    }
    return out;
}

std::vector<int> propagate_labels(const ClusterAssignment& assignment,
                                  std::span<const int> centroid_labels) {
    std::vector<int> out(assignment.centroid.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = centroid_labels[static_cast<std::size_t>(assignment.centroid[i])];
    return out;
}

PseudoLabeling resolve_cross_modal(const std::vector<std::vector<int>>& raw_labels,
                                   const std::vector<std::vector<double>>& distances) {
    if (raw_labels.empty() || raw_labels.size() != distances.size())
        throw InvalidArgument("resolve_cross_modal: modality count mismatch");
    const std::size_t n = raw_labels.front().size();
    for (std::size_t m = 0; m < raw_labels.size(); ++m)
        if (raw_labels[m].size() != n || distances[m].size() != n)
            throw InvalidArgument("resolve_cross_modal: instance count mismatch");

    PseudoLabeling out;
    out.raw_labels = raw_labels;
    out.labels.resize(n);
    out.provenance.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        bool agreed = true;
        for (std::size_t m = 1; m < raw_labels.size(); ++m)
            if (raw_labels[m][i] != raw_labels[0][i]) {
                agreed = false;
                break;
            }
        if (agreed) {
            out.labels[i] = raw_labels[0][i];
            out.provenance[i] = {Provenance::Agreed, -1};
        } else {
            std::size_t best = 0;
            for (std::size_t m = 1; m < distances.size(); ++m)
                if (distances[m][i] < distances[best][i]) best = m;
            out.labels[i] = raw_labels[best][i];
            out.provenance[i] = {Provenance::Resolved, static_cast<int>(best)};
        }
    }
    return out;
}

namespace {

Matrix centroid_coords(const Matrix& preprocessed, const CentroidSeed& seed) {
    Matrix coords(static_cast<Eigen::Index>(seed.indices.size()), preprocessed.cols());
    for (std::size_t j = 0; j < seed.indices.size(); ++j)
        coords.row(static_cast<Eigen::Index>(j)) = preprocessed.row(seed.indices[j]);
    return coords;
}

void apply_prelabel_override(PseudoLabeling& pl, const CentroidSeed& seed,
                             std::span<const int> true_labels) {
    for (int idx : seed.indices) {
        pl.labels[static_cast<std::size_t>(idx)] = true_labels[static_cast<std::size_t>(idx)];
        pl.provenance[static_cast<std::size_t>(idx)] = {Provenance::Prelabeled, -1};
    }
}

}  // namespace

PseudoLabeling cmcsl_pseudolabels(const MultimodalDataset& train, int b_class,
                                  PreprocessKind kind, std::uint64_t rng_seed) {
    const auto seed = select_prelabeled(train.labels, train.n_classes, b_class, rng_seed);
    std::vector<std::vector<int>> raw(train.modalities.size());
    std::vector<std::vector<double>> dist(train.modalities.size());
    for (std::size_t m = 0; m < train.modalities.size(); ++m) {
        const auto scaler = fit_scaler(kind, train.modalities[m].matrix);
        const Matrix x = apply_scaler(scaler, train.modalities[m].matrix);
        const auto assignment = assign_clusters(x, centroid_coords(x, seed));
        raw[m] = propagate_labels(assignment, seed.labels);
        dist[m] = assignment.distance;
    }
    PseudoLabeling pl = resolve_cross_modal(raw, dist);
    apply_prelabel_override(pl, seed, train.labels);
    return pl;
}

PseudoLabeling unimodal_pseudolabels(const MultimodalDataset& train, int modality,
                                     int b_class, PreprocessKind kind, std::uint64_t rng_seed) {
    if (modality < 0 || static_cast<std::size_t>(modality) >= train.modalities.size())
        throw InvalidArgument("unimodal_pseudolabels: modality index out of range");
    const auto seed = select_prelabeled(train.labels, train.n_classes, b_class, rng_seed);
    const auto scaler = fit_scaler(kind, train.modalities[static_cast<std::size_t>(modality)].matrix);
    const Matrix x = apply_scaler(scaler, train.modalities[static_cast<std::size_t>(modality)].matrix);
    const auto assignment = assign_clusters(x, centroid_coords(x, seed));

    PseudoLabeling pl;
    pl.raw_labels.push_back(propagate_labels(assignment, seed.labels));
    pl.labels = pl.raw_labels.front();
    pl.provenance.assign(pl.labels.size(), {Provenance::Agreed, -1});
    apply_prelabel_override(pl, seed, train.labels);
    return pl;
}

}  // namespace cmcsl
