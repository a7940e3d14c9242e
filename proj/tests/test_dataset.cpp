#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cmcsl/classifiers.hpp"
#include "cmcsl/dataset.hpp"
#include "cmcsl/evalstats.hpp"
#include "cmcsl/rng.hpp"
#include "oracles.hpp"

using namespace cmcsl;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const auto dir = fs::temp_directory_path() / ("cmcsl_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path);
    f << content;
}

fs::path write_minimal_manifest(const fs::path& dir, const std::string& visual,
                                const std::string& text, const std::string& labels) {
    write_file(dir / "visual.csv", visual);
    write_file(dir / "text.csv", text);
    write_file(dir / "labels.csv", labels);
    write_file(dir / "manifest.json", R"({
      "name": "mini",
      "labels": "labels.csv",
      "modalities": [
        {"name": "visual", "path": "visual.csv"},
        {"name": "text", "path": "text.csv"}
      ]
    })");
    return dir / "manifest.json";
}

}  // namespace

TEST_CASE("load_multimodal accepts a minimal two-modality dataset") {
    const auto dir = temp_dir("load_ok");
    const auto manifest = write_minimal_manifest(dir, "1,2\n3,4\n5,6\n7,8\n",
                                                 "1,0,0\n0,1,0\n0,0,1\n1,1,0\n", "0\n0\n1\n1\n");
    const auto ds = load_multimodal(manifest);
    CHECK(ds.size() == 4);
    CHECK(ds.n_classes == 2);
    CHECK(ds.modalities.size() == 2);
    CHECK(ds.modalities[0].dim() == 2);
    CHECK(ds.modalities[1].dim() == 3);
    CHECK(ds.modalities[1].matrix(3, 1) == 1.0);
}

TEST_CASE("load_multimodal detects an optional header row") {
    const auto dir = temp_dir("load_header");
    const auto manifest = write_minimal_manifest(dir, "f0,f1\n1,2\n3,4\n5,6\n7,8\n",
                                                 "1\n2\n3\n4\n", "0\n0\n1\n1\n");
    const auto ds = load_multimodal(manifest);
    CHECK(ds.size() == 4);
    CHECK(ds.modalities[0].matrix(0, 0) == 1.0);
}

TEST_CASE("load_multimodal error paths") {
    SUBCASE("row count mismatch") {
        const auto dir = temp_dir("load_rows");
        const auto manifest = write_minimal_manifest(dir, "1,2\n3,4\n5,6\n7,8\n",
                                                     "1\n2\n3\n4\n5\n", "0\n0\n1\n1\n");
        CHECK_THROWS_AS(load_multimodal(manifest), DataError);
    }
    SUBCASE("non-finite value") {
        const auto dir = temp_dir("load_nan");
        const auto manifest =
            write_minimal_manifest(dir, "1,2\n3,NaN\n5,6\n7,8\n", "1\n2\n3\n4\n", "0\n0\n1\n1\n");
        CHECK_THROWS_AS(load_multimodal(manifest), DataError);
    }
    SUBCASE("missing file") {
        const auto dir = temp_dir("load_missing");
        const auto manifest = write_minimal_manifest(dir, "1\n2\n3\n4\n", "1\n2\n3\n4\n", "0\n0\n1\n1\n");
        fs::remove(dir / "text.csv");
        CHECK_THROWS_AS(load_multimodal(manifest), DataError);
    }
    SUBCASE("fewer than two modalities") {
        const auto dir = temp_dir("load_single");
        write_file(dir / "visual.csv", "1\n2\n");
        write_file(dir / "labels.csv", "0\n1\n");
        write_file(dir / "manifest.json",
                   R"({"name":"x","labels":"labels.csv","modalities":[{"name":"v","path":"visual.csv"}]})");
        CHECK_THROWS_AS(load_multimodal(dir / "manifest.json"), DataError);
    }
    SUBCASE("label gap leaves a class empty") {
        const auto dir = temp_dir("load_gap");
        const auto manifest =
            write_minimal_manifest(dir, "1\n2\n3\n4\n", "1\n2\n3\n4\n", "0\n0\n2\n2\n");
        CHECK_THROWS_AS(load_multimodal(manifest), DataError);
    }
}

TEST_CASE("CSV round-trip reproduces matrices") {
    const auto dir = temp_dir("roundtrip");
    SyntheticSpec spec;
    spec.n_classes = 2;
    spec.samples_per_class = 10;
    spec.modalities = {{"a", 3, 2.0, 1.0}, {"b", 2, 1.0, 0.5}};
    spec.seed = 3;
    const auto ds = make_synthetic(spec);
    const auto manifest = save_multimodal(ds, dir);
    const auto back = load_multimodal(manifest);
    REQUIRE(back.size() == ds.size());
    for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
        const Matrix diff = back.modalities[m].matrix - ds.modalities[m].matrix;
        CHECK(diff.cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK(back.labels == ds.labels);
}

TEST_CASE("binary matrix cache round-trips bit for bit") {
    const auto dir = temp_dir("bin");
    rng::Engine rng(11);
    const Matrix m = oracle::random_matrix(rng, 17, 5, -100.0, 100.0);
    save_matrix_binary(m, dir / "m.bin");
    const Matrix back = load_matrix_binary(dir / "m.bin");
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) CHECK(back(i, j) == m(i, j));
    // And the loader sniffs the magic bytes.
    const Matrix sniffed = load_feature_matrix(dir / "m.bin");
    CHECK(sniffed(3, 2) == m(3, 2));
}

TEST_CASE("make_synthetic is deterministic") {
    SyntheticSpec spec;
    spec.n_classes = 3;
    spec.samples_per_class = 7;
    spec.modalities = {{"a", 4, 3.0, 1.0}, {"b", 5, 0.5, 2.0}};
    spec.seed = 7;
    const auto d1 = make_synthetic(spec);
    const auto d2 = make_synthetic(spec);
    CHECK(d1.labels == d2.labels);
    for (std::size_t m = 0; m < d1.modalities.size(); ++m)
        CHECK((d1.modalities[m].matrix - d2.modalities[m].matrix).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("synthetic separation controls the fully supervised difficulty") {
    // Full-label GNB, two folds: separation 0 is chance level, sep/std=10 is
    // nearly perfect. 20 seeds each.
    auto mean_bac = [](double separation) {
        double acc = 0.0;
        for (int seed = 0; seed < 20; ++seed) {
            SyntheticSpec spec;
            spec.n_classes = 2;
            spec.samples_per_class = 50;
            spec.modalities = {{"m0", 4, separation, 1.0}, {"m1", 4, 5.0, 1.0}};
            spec.seed = static_cast<std::uint64_t>(seed);
            const auto ds = make_synthetic(spec);
            const auto folds = stratified_two_fold(ds.labels, static_cast<std::uint64_t>(seed));
            const auto train = ds.subset(folds.fold_a);
            const auto test = ds.subset(folds.fold_b);
            const auto model = fit_classifier(ClassifierKind::Gnb, train.modalities[0].matrix,
                                              train.labels, 2);
            acc += balanced_accuracy(test.labels, model->predict(test.modalities[0].matrix), 2);
        }
        return acc / 20.0;
    };
    CHECK(std::fabs(mean_bac(0.0) - 0.5) <= 0.1);
    CHECK(mean_bac(10.0) >= 0.99);
}

TEST_CASE("stratified_two_fold splits every class evenly") {
    SUBCASE("even classes") {
        const std::vector<int> labels = {0, 0, 0, 0, 1, 1, 1, 1};
        const auto folds = stratified_two_fold(labels, 5);
        auto zeros = [&](const std::vector<int>& fold) {
            int n = 0;
            for (int i : fold)
                if (labels[static_cast<std::size_t>(i)] == 0) ++n;
            return n;
        };
        CHECK(folds.fold_a.size() == 4);
        CHECK(folds.fold_b.size() == 4);
        CHECK(zeros(folds.fold_a) == 2);
        CHECK(zeros(folds.fold_b) == 2);
    }
    SUBCASE("odd class splits 2/1") {
        const std::vector<int> labels = {0, 0, 0, 1, 1};
        const auto folds = stratified_two_fold(labels, 5);
        int zeros_a = 0, zeros_b = 0, ones_a = 0;
        for (int i : folds.fold_a) (labels[static_cast<std::size_t>(i)] == 0 ? zeros_a : ones_a)++;
        for (int i : folds.fold_b)
            if (labels[static_cast<std::size_t>(i)] == 0) ++zeros_b;
        // Class 0 is even-indexed, so its extra member lands in fold_a.
        CHECK(zeros_a == 2);
        CHECK(zeros_b == 1);
        CHECK(ones_a == 1);
    }
    SUBCASE("class below two members is rejected") {
        const std::vector<int> labels = {0, 1, 1};
        CHECK_THROWS_AS(stratified_two_fold(labels, 1), InvalidArgument);
    }
}

TEST_CASE("stratified_two_fold property: partition and per-class balance") {
    rng::Engine rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const int n_classes = 1 + static_cast<int>(rng.bounded(4));
        const int n = n_classes * 2 + static_cast<int>(rng.bounded(40));
        auto labels = oracle::random_labels(rng, n, n_classes);
        // Force the >=2 members precondition.
        for (int k = 0; k < n_classes; ++k) labels.push_back(k);
        for (int k = 0; k < n_classes; ++k) labels.push_back(k);

        const auto folds = stratified_two_fold(labels, rng.next_u64());
        std::vector<int> seen(labels.size(), 0);
        for (int i : folds.fold_a) seen[static_cast<std::size_t>(i)] += 1;
        for (int i : folds.fold_b) seen[static_cast<std::size_t>(i)] += 1;
        for (int s : seen) CHECK(s == 1);

        for (int k = 0; k < n_classes; ++k) {
            int ca = 0, cb = 0;
            for (int i : folds.fold_a)
                if (labels[static_cast<std::size_t>(i)] == k) ++ca;
            for (int i : folds.fold_b)
                if (labels[static_cast<std::size_t>(i)] == k) ++cb;
            CHECK(std::abs(ca - cb) <= 1);
        }
    }
}

TEST_CASE("stratified_two_fold is seed-deterministic") {
    const std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
    const auto f1 = stratified_two_fold(labels, 42);
    const auto f2 = stratified_two_fold(labels, 42);
    CHECK(f1.fold_a == f2.fold_a);
    CHECK(f1.fold_b == f2.fold_b);
}
