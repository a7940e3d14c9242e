#include "cmcsl/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cmcsl/rng.hpp"

namespace cmcsl {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_line(const std::string& line, char delim = ',') {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_double(const std::string& token, double& value) {
    const char* begin = token.data();
    const char* end = begin + token.size();
    auto res = std::from_chars(begin, end, value);
    return res.ec == std::errc() && res.ptr == end;
}

// Writes with enough digits that reading back reproduces the double.
void write_double(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
}

constexpr std::array<char, 4> kMagic = {'C', 'M', 'M', 'L'};

void put_u32_le(std::ostream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(bytes, 4);
}

std::uint32_t get_u32_le(std::istream& is, const std::filesystem::path& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated binary matrix: " + path.string());
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

Matrix load_matrix_csv(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw DataError("cannot open feature file: " + path.string());

    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    bool first_data_line = true;
    while (std::getline(file, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto tokens = split_line(line);
        std::vector<double> row(tokens.size());
        bool numeric = true;
        for (std::size_t j = 0; j < tokens.size(); ++j) {
            if (!parse_double(tokens[j], row[j])) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            // A non-numeric first row is treated as a header; anywhere else
            // it is an error.
            if (first_data_line) {
                first_data_line = false;
                continue;
            }
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": non-numeric value");
        }
        first_data_line = false;
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (!std::isfinite(row[j])) {
                throw DataError(path.string() + ":" + std::to_string(lineno) +
                                ": non-finite value in column " + std::to_string(j));
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(rows.front().size()) + " columns, got " +
                            std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("feature file has no data rows: " + path.string());

    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

bool has_binary_magic(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) return false;
    char head[4] = {};
    file.read(head, 4);
    return file.gcount() == 4 && std::memcmp(head, kMagic.data(), 4) == 0;
}

}  // namespace

void MultimodalDataset::validate() const {
    if (modalities.size() < 2)
        throw DataError("dataset '" + name + "' needs >= 2 modalities, got " +
                        std::to_string(modalities.size()));
    if (n_classes < 1) throw DataError("dataset '" + name + "': n_classes must be >= 1");
    const Eigen::Index n = size();
    if (n < n_classes)
        throw DataError("dataset '" + name + "': fewer instances than classes");
    for (const auto& view : modalities) {
        if (view.rows() != n)
            throw DataError("dataset '" + name + "': modality '" + view.name + "' has " +
                            std::to_string(view.rows()) + " rows, labels have " + std::to_string(n));
        if (view.dim() < 1)
            throw DataError("dataset '" + name + "': modality '" + view.name + "' has no features");
        if (!view.matrix.allFinite())
            throw DataError("dataset '" + name + "': modality '" + view.name + "' contains non-finite values");
    }
    std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= n_classes)
            throw DataError("dataset '" + name + "': label " + std::to_string(y) + " at row " +
                            std::to_string(i) + " outside 0.." + std::to_string(n_classes - 1));
        seen[static_cast<std::size_t>(y)] = true;
    }
    for (int k = 0; k < n_classes; ++k)
        if (!seen[static_cast<std::size_t>(k)])
            throw DataError("dataset '" + name + "': class " + std::to_string(k) + " has no instances");
}

MultimodalDataset MultimodalDataset::subset(std::span<const int> rows) const {
    MultimodalDataset out;
    out.name = name;
    out.n_classes = n_classes;
    out.labels.reserve(rows.size());
    for (int r : rows) out.labels.push_back(labels[static_cast<std::size_t>(r)]);
    out.modalities.reserve(modalities.size());
    for (const auto& view : modalities) {
        ModalityView sub;
        sub.name = view.name;
        sub.matrix.resize(static_cast<Eigen::Index>(rows.size()), view.dim());
        for (std::size_t i = 0; i < rows.size(); ++i) sub.matrix.row(static_cast<Eigen::Index>(i)) = view.matrix.row(rows[i]);
        out.modalities.push_back(std::move(sub));
    }
    return out;
}

Matrix load_feature_matrix(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("missing feature file: " + path.string());
    if (has_binary_magic(path)) return load_matrix_binary(path);
    return load_matrix_csv(path);
}

std::vector<int> load_labels_csv(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw DataError("cannot open labels file: " + path.string());
    std::vector<int> labels;
    std::string line;
    std::size_t lineno = 0;
    bool first = true;
    while (std::getline(file, line)) {
        ++lineno;
        const std::string token = trim(line);
        if (token.empty()) continue;
        int value = 0;
        auto res = std::from_chars(token.data(), token.data() + token.size(), value);
        if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
            if (first) {
                first = false;
                continue;  // header
            }
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": not an integer label");
        }
        first = false;
        if (value < 0)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": negative label");
        labels.push_back(value);
    }
    if (labels.empty()) throw DataError("labels file has no rows: " + path.string());
    return labels;
}

void save_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot write " + path.string());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) file << ',';
            write_double(file, m(i, j));
        }
        file << '\n';
    }
}

void save_matrix_binary(const Matrix& m, const std::filesystem::path& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot write " + path.string());
    file.write(kMagic.data(), 4);
    const char version = 1;
    file.write(&version, 1);
    put_u32_le(file, static_cast<std::uint32_t>(m.rows()));
    put_u32_le(file, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            char bytes[8];
            for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
            file.write(bytes, 8);
        }
    }
}

Matrix load_matrix_binary(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open " + path.string());
    char head[4];
    if (!file.read(head, 4) || std::memcmp(head, kMagic.data(), 4) != 0)
        throw DataError("bad magic in binary matrix: " + path.string());
    char version = 0;
    if (!file.read(&version, 1) || version != 1)
        throw DataError("unsupported binary matrix version in " + path.string());
    const std::uint32_t n = get_u32_le(file, path);
    const std::uint32_t d = get_u32_le(file, path);
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < d; ++j) {
            unsigned char bytes[8];
            if (!file.read(reinterpret_cast<char*>(bytes), 8))
                throw DataError("truncated binary matrix: " + path.string());
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
            double v;
            std::memcpy(&v, &bits, 8);
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return m;
}

MultimodalDataset load_multimodal(const std::filesystem::path& manifest_path) {
    if (!std::filesystem::exists(manifest_path))
        throw DataError("missing manifest: " + manifest_path.string());
    std::ifstream file(manifest_path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(file);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest parse error in " + manifest_path.string() + ": " + e.what());
    }

    MultimodalDataset dataset;
    const auto base = manifest_path.parent_path();
    try {
        dataset.name = doc.value("name", manifest_path.stem().string());
        if (!doc.contains("labels")) throw DataError("manifest missing 'labels' key");
        if (!doc.contains("modalities") || !doc["modalities"].is_array())
            throw DataError("manifest missing 'modalities' array");
        dataset.labels = load_labels_csv(base / doc["labels"].get<std::string>());
        for (const auto& entry : doc["modalities"]) {
            ModalityView view;
            view.name = entry.at("name").get<std::string>();
            view.matrix = load_feature_matrix(base / entry.at("path").get<std::string>());
            dataset.modalities.push_back(std::move(view));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest field error in " + manifest_path.string() + ": " + e.what());
    }
    dataset.n_classes = dataset.labels.empty() ? 0 : *std::max_element(dataset.labels.begin(), dataset.labels.end()) + 1;
    dataset.validate();
    return dataset;
}

std::filesystem::path save_multimodal(const MultimodalDataset& dataset,
                                      const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json doc;
    doc["name"] = dataset.name;
    doc["labels"] = "labels.csv";
    doc["modalities"] = nlohmann::json::array();

    {
        std::ofstream labels_file(out_dir / "labels.csv");
        if (!labels_file) throw DataError("cannot write labels.csv in " + out_dir.string());
        for (int y : dataset.labels) labels_file << y << '\n';
    }
    for (const auto& view : dataset.modalities) {
        const std::string filename = view.name + ".csv";
        save_matrix_csv(view.matrix, out_dir / filename);
        doc["modalities"].push_back({{"name", view.name}, {"path", filename}});
    }
    const auto manifest = out_dir / "manifest.json";
    std::ofstream mf(manifest);
    if (!mf) throw DataError("cannot write " + manifest.string());
    mf << doc.dump(2) << '\n';
    return manifest;
}

MultimodalDataset make_synthetic(const SyntheticSpec& spec) {
    if (spec.n_classes < 1) throw InvalidArgument("synthetic: n_classes must be >= 1");
    if (spec.samples_per_class < 1) throw InvalidArgument("synthetic: samples_per_class must be >= 1");
    if (spec.modalities.size() < 2) throw InvalidArgument("synthetic: need >= 2 modalities");
    for (const auto& mod : spec.modalities) {
        if (mod.dim < spec.n_classes)
            throw InvalidArgument("synthetic: modality '" + mod.name + "' dim " + std::to_string(mod.dim) +
                                  " < n_classes (one-hot center placement needs dim >= n_classes)");
        if (mod.separation < 0.0) throw InvalidArgument("synthetic: separation must be >= 0");
        if (mod.stddev <= 0.0) throw InvalidArgument("synthetic: stddev must be > 0");
    }

    MultimodalDataset dataset;
    dataset.name = spec.name;
    dataset.n_classes = spec.n_classes;
    const Eigen::Index n = static_cast<Eigen::Index>(spec.n_classes) * spec.samples_per_class;
    dataset.labels.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < spec.n_classes; ++k)
        for (int s = 0; s < spec.samples_per_class; ++s)
            dataset.labels[static_cast<std::size_t>(k) * spec.samples_per_class + s] = k;

    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
        const auto& mod = spec.modalities[m];
        // Class k center = (separation / sqrt(2)) * e_k, so every pair of
        // centers is exactly `separation` apart.
        const double scale = mod.separation / std::sqrt(2.0);
        rng::Engine rng(rng::hash_combine(spec.seed, m));
        ModalityView view;
        view.name = mod.name;
        view.matrix.resize(n, mod.dim);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int k = dataset.labels[static_cast<std::size_t>(i)];
            for (int j = 0; j < mod.dim; ++j) {
                const double center = (j == k) ? scale : 0.0;
                view.matrix(i, j) = center + mod.stddev * rng.gaussian();
            }
        }
        dataset.modalities.push_back(std::move(view));
    }
    dataset.validate();
    return dataset;
}

FoldPair stratified_two_fold(std::span<const int> labels, std::uint64_t rng_seed) {
    int n_classes = 0;
    for (int y : labels) n_classes = std::max(n_classes, y + 1);
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
    for (int k = 0; k < n_classes; ++k)
        if (by_class[static_cast<std::size_t>(k)].size() < 2)
            throw InvalidArgument("stratified_two_fold: class " + std::to_string(k) + " has " +
                                  std::to_string(by_class[static_cast<std::size_t>(k)].size()) +
                                  " member(s), needs >= 2");

    rng::Engine rng(rng_seed);
    FoldPair folds;
    for (int k = 0; k < n_classes; ++k) {
        auto& members = by_class[static_cast<std::size_t>(k)];
        rng.shuffle(members);
        const std::size_t n = members.size();
        // Odd class: the extra member goes to fold_a for even class ids.
        std::size_t take_a = n / 2;
        if (n % 2 == 1 && k % 2 == 0) ++take_a;
        for (std::size_t i = 0; i < n; ++i)
            (i < take_a ? folds.fold_a : folds.fold_b).push_back(members[i]);
    }
    std::sort(folds.fold_a.begin(), folds.fold_a.end());
    std::sort(folds.fold_b.begin(), folds.fold_b.end());
    return folds;
}

}  // namespace cmcsl
