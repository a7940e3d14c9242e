#include "cmcsl/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "cmcsl/propagate.hpp"
#include "cmcsl/rng.hpp"

namespace cmcsl {

namespace {

constexpr std::array<MethodKind, 6> kMethodOrder = {
    MethodKind::Full, MethodKind::EarlyFusion, MethodKind::LateFusion,
    MethodKind::Pre,  MethodKind::Uni,         MethodKind::Cmcsl};

int method_rank(MethodKind kind) {
    for (std::size_t i = 0; i < kMethodOrder.size(); ++i)
        if (kMethodOrder[i] == kind) return static_cast<int>(i);
    return 99;
}

std::string format_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::uint64_t fnv_indices(std::span<const int> indices) {
    std::uint64_t h = 1469598103934665603ULL;
    for (int idx : indices) {
        const auto v = static_cast<std::uint32_t>(idx);
        for (int b = 0; b < 4; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

MethodKind parse_method_kind(std::string_view text) {
    if (text == "full") return MethodKind::Full;
    if (text == "ef") return MethodKind::EarlyFusion;
    if (text == "lf") return MethodKind::LateFusion;
    if (text == "pre") return MethodKind::Pre;
    if (text == "uni") return MethodKind::Uni;
    if (text == "cmcsl") return MethodKind::Cmcsl;
    throw InvalidArgument("unknown method '" + std::string(text) +
                          "' (expected full|ef|lf|pre|uni|cmcsl)");
}

std::string_view to_string(MethodKind kind) {
    switch (kind) {
        case MethodKind::Full: return "full";
        case MethodKind::EarlyFusion: return "ef";
        case MethodKind::LateFusion: return "lf";
        case MethodKind::Pre: return "pre";
        case MethodKind::Uni: return "uni";
        case MethodKind::Cmcsl: return "cmcsl";
    }
    return "?";
}

std::vector<MethodKind> parse_method_list(std::string_view csv) {
    std::vector<MethodKind> out;
    std::string token;
    auto flush = [&]() {
        if (token.empty()) return;
        const MethodKind kind = parse_method_kind(token);
        if (std::find(out.begin(), out.end(), kind) == out.end()) out.push_back(kind);
        token.clear();
    };
    for (char c : csv) {
        if (c == ',') flush();
        else if (!std::isspace(static_cast<unsigned char>(c))) token.push_back(c);
    }
    flush();
    if (out.empty()) throw InvalidArgument("empty method list");
    std::sort(out.begin(), out.end(),
              [](MethodKind a, MethodKind b) { return method_rank(a) < method_rank(b); });
    return out;
}

bool is_budget_dependent(MethodKind kind) {
    return kind == MethodKind::Pre || kind == MethodKind::Uni || kind == MethodKind::Cmcsl;
}

bool is_fused(MethodKind kind) {
    return kind == MethodKind::EarlyFusion || kind == MethodKind::LateFusion;
}

ExperimentConfig::ExperimentConfig() {
    budgets.resize(20);
    std::iota(budgets.begin(), budgets.end(), 1);
    methods.assign(kMethodOrder.begin(), kMethodOrder.end());
}

void ExperimentConfig::validate() const {
    if (datasets.empty()) throw InvalidArgument("config: no datasets");
    std::set<std::string> names;
    for (const auto& src : datasets) {
        if (src.name.empty()) throw InvalidArgument("config: dataset without a name");
        if (src.name.find(',') != std::string::npos || src.name.find('\n') != std::string::npos)
            throw InvalidArgument("config: dataset name '" + src.name + "' contains ',' or newline");
        if (!names.insert(src.name).second)
            throw InvalidArgument("config: duplicate dataset name '" + src.name + "'");
        if (src.manifest.empty() == !src.synthetic.has_value())
            throw InvalidArgument("config: dataset '" + src.name +
                                  "' needs exactly one of manifest or synthetic spec");
    }
    if (folds != 2) throw InvalidArgument("config: the protocol is two-fold; folds must be 2");
    if (repeats < 1) throw InvalidArgument("config: repeats must be >= 1");
    if (budgets.empty()) throw InvalidArgument("config: empty budget list");
    for (int b : budgets)
        if (b < 1) throw InvalidArgument("config: budgets must be >= 1");
    if (methods.empty()) throw InvalidArgument("config: no methods selected");
    if (jobs < 1) throw InvalidArgument("config: jobs must be >= 1");
}

std::vector<int> parse_budget_list(std::string_view text) {
    std::vector<int> out;
    std::string token;
    auto parse_int = [](const std::string& s) {
        int v = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw InvalidArgument("bad budget token '" + s + "'");
        return v;
    };
    auto flush = [&]() {
        if (token.empty()) return;
        const auto dash = token.find('-');
        if (dash == std::string::npos) {
            out.push_back(parse_int(token));
        } else {
            const int lo = parse_int(token.substr(0, dash));
            const int hi = parse_int(token.substr(dash + 1));
            if (lo > hi) throw InvalidArgument("bad budget range '" + token + "'");
            for (int b = lo; b <= hi; ++b) out.push_back(b);
        }
        token.clear();
    };
    for (char c : text) {
        if (c == ',') flush();
        else if (!std::isspace(static_cast<unsigned char>(c))) token.push_back(c);
    }
    flush();
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty()) throw InvalidArgument("empty budget list");
    return out;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw DataError("cannot open config: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(file);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config parse error in " + path.string() + ": " + e.what());
    }

    ExperimentConfig cfg;
    const auto base = path.parent_path();
    try {
        if (!doc.contains("datasets") || !doc["datasets"].is_array())
            throw DataError("config missing 'datasets' array");
        for (const auto& entry : doc["datasets"]) {
            DatasetSource src;
            src.name = entry.at("name").get<std::string>();
            if (entry.contains("manifest")) {
                src.manifest = base / entry["manifest"].get<std::string>();
            } else if (entry.contains("synthetic")) {
                const auto& syn = entry["synthetic"];
                SyntheticSpec spec;
                spec.name = src.name;
                spec.n_classes = syn.at("classes").get<int>();
                spec.samples_per_class = syn.at("per_class").get<int>();
                spec.seed = syn.value("seed", 0ULL);
                for (const auto& mod : syn.at("modalities")) {
                    SyntheticModality sm;
                    sm.name = mod.at("name").get<std::string>();
                    sm.dim = mod.at("dim").get<int>();
                    sm.separation = mod.at("separation").get<double>();
                    sm.stddev = mod.value("stddev", 1.0);
                    spec.modalities.push_back(std::move(sm));
                }
                src.synthetic = std::move(spec);
            }
            cfg.datasets.push_back(std::move(src));
        }
        if (doc.contains("classifier"))
            cfg.classifier = parse_classifier_kind(doc["classifier"].get<std::string>());
        if (doc.contains("preprocess"))
            cfg.preprocess = parse_preprocess_kind(doc["preprocess"].get<std::string>());
        if (doc.contains("budgets")) {
            if (doc["budgets"].is_string())
                cfg.budgets = parse_budget_list(doc["budgets"].get<std::string>());
            else
                cfg.budgets = doc["budgets"].get<std::vector<int>>();
        }
        if (doc.contains("repeats")) cfg.repeats = doc["repeats"].get<int>();
        if (doc.contains("folds")) cfg.folds = doc["folds"].get<int>();
        if (doc.contains("master_seed")) cfg.master_seed = doc["master_seed"].get<std::uint64_t>();
        if (doc.contains("methods")) {
            if (doc["methods"].is_string()) {
                cfg.methods = parse_method_list(doc["methods"].get<std::string>());
            } else {
                std::string joined;
                for (const auto& m : doc["methods"]) {
                    if (!joined.empty()) joined += ',';
                    joined += m.get<std::string>();
                }
                cfg.methods = parse_method_list(joined);
            }
        }
        if (doc.contains("jobs")) cfg.jobs = doc["jobs"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config field error in " + path.string() + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

// --- experiment execution ---

namespace {

struct Task {
    std::size_t dataset;
    int repeat;
    int fold;
};

int min_class_count(std::span<const int> labels, int n_classes) {
    std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    return *std::min_element(counts.begin(), counts.end());
}

class StopWatch {
public:
    StopWatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::vector<ResultRecord> run_task(const MultimodalDataset& ds, const ExperimentConfig& cfg,
                                   int repeat, int fold) {
    const std::uint64_t ds_seed = rng::hash_string(cfg.master_seed, ds.name);
    const std::uint64_t fold_seed =
        rng::hash_combine(rng::hash_combine(ds_seed, 0xF01DULL), static_cast<std::uint64_t>(repeat));
    const FoldPair folds = stratified_two_fold(ds.labels, fold_seed);
    const auto& train_idx = fold == 0 ? folds.fold_a : folds.fold_b;
    const auto& test_idx = fold == 0 ? folds.fold_b : folds.fold_a;
    const MultimodalDataset train = ds.subset(train_idx);
    const MultimodalDataset test = ds.subset(test_idx);
    const int k = ds.n_classes;

    const std::size_t m_count = ds.modalities.size();
    std::vector<Matrix> x_train(m_count), x_test(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
        const FittedScaler scaler = fit_scaler(cfg.preprocess, train.modalities[m].matrix);
        x_train[m] = apply_scaler(scaler, train.modalities[m].matrix);
        x_test[m] = apply_scaler(scaler, test.modalities[m].matrix);
    }

    ResultRecord proto;
    proto.dataset = ds.name;
    proto.classifier = cfg.classifier;
    proto.preprocess = cfg.preprocess;
    proto.n_classes = k;
    proto.repeat = repeat;
    proto.fold = fold;

    std::vector<ResultRecord> out;
    const bool want_full = std::find(cfg.methods.begin(), cfg.methods.end(), MethodKind::Full) != cfg.methods.end();
    const bool want_ef = std::find(cfg.methods.begin(), cfg.methods.end(), MethodKind::EarlyFusion) != cfg.methods.end();
    const bool want_lf = std::find(cfg.methods.begin(), cfg.methods.end(), MethodKind::LateFusion) != cfg.methods.end();
    const bool want_pre = std::find(cfg.methods.begin(), cfg.methods.end(), MethodKind::Pre) != cfg.methods.end();
    const bool want_uni = std::find(cfg.methods.begin(), cfg.methods.end(), MethodKind::Uni) != cfg.methods.end();
    const bool want_cmcsl = std::find(cfg.methods.begin(), cfg.methods.end(), MethodKind::Cmcsl) != cfg.methods.end();

    if (want_full) {
        for (std::size_t m = 0; m < m_count; ++m) {
            StopWatch watch;
            const auto model = fit_classifier(cfg.classifier, x_train[m], train.labels, k);
            const auto pred = model->predict(x_test[m]);
            ResultRecord rec = proto;
            rec.method = MethodKind::Full;
            rec.modality = ds.modalities[m].name;
            rec.seed = fold_seed;
            rec.bac = balanced_accuracy(test.labels, pred, k);
            rec.wall_time_s = watch.seconds();
            out.push_back(std::move(rec));
        }
    }
    if (want_ef) {
        StopWatch watch;
        const auto model = FusionModel::fit(FusionMode::Early, cfg.classifier, x_train, train.labels, k);
        ResultRecord rec = proto;
        rec.method = MethodKind::EarlyFusion;
        rec.modality = "fused";
        rec.seed = fold_seed;
        rec.bac = balanced_accuracy(test.labels, model.predict(x_test), k);
        rec.wall_time_s = watch.seconds();
        out.push_back(std::move(rec));
    }
    if (want_lf) {
        StopWatch watch;
        const auto model = FusionModel::fit(FusionMode::Late, cfg.classifier, x_train, train.labels, k);
        ResultRecord rec = proto;
        rec.method = MethodKind::LateFusion;
        rec.modality = "fused";
        rec.seed = fold_seed;
        rec.bac = balanced_accuracy(test.labels, model.predict(x_test), k);
        rec.wall_time_s = watch.seconds();
        out.push_back(std::move(rec));
    }

    if (!(want_pre || want_uni || want_cmcsl)) return out;

    const int budget_cap = min_class_count(train.labels, k);
    for (int b : cfg.budgets) {
        const std::uint64_t cell_seed = rng::hash_combine(
            rng::hash_combine(rng::hash_combine(ds_seed, static_cast<std::uint64_t>(repeat)),
                              static_cast<std::uint64_t>(fold)),
            static_cast<std::uint64_t>(b));
        const bool feasible = b <= budget_cap;

        auto push_infeasible = [&](MethodKind method, const std::string& modality) {
            ResultRecord rec = proto;
            rec.method = method;
            rec.modality = modality;
            rec.b_class = b;
            rec.seed = cell_seed;
            rec.infeasible = true;
            rec.bac = std::numeric_limits<double>::quiet_NaN();
            out.push_back(std::move(rec));
        };
        if (!feasible) {
            for (std::size_t m = 0; m < m_count; ++m) {
                if (want_pre) push_infeasible(MethodKind::Pre, ds.modalities[m].name);
                if (want_uni) push_infeasible(MethodKind::Uni, ds.modalities[m].name);
                if (want_cmcsl) push_infeasible(MethodKind::Cmcsl, ds.modalities[m].name);
            }
            continue;
        }

        const CentroidSeed seedset = select_prelabeled(train.labels, k, b, cell_seed);
        std::vector<int> pre_rows = seedset.indices;
        std::sort(pre_rows.begin(), pre_rows.end());
        const std::uint64_t prelabel_hash = fnv_indices(pre_rows);

        auto push_record = [&](MethodKind method, const std::string& modality, double bac,
                               double secs) {
            ResultRecord rec = proto;
            rec.method = method;
            rec.modality = modality;
            rec.b_class = b;
            rec.seed = cell_seed;
            rec.prelabel_hash = prelabel_hash;
            rec.bac = bac;
            rec.wall_time_s = secs;
            out.push_back(std::move(rec));
        };

        if (want_pre) {
            std::vector<int> y_pre;
            y_pre.reserve(pre_rows.size());
            for (int r : pre_rows) y_pre.push_back(train.labels[static_cast<std::size_t>(r)]);
            for (std::size_t m = 0; m < m_count; ++m) {
                StopWatch watch;
                Matrix x_pre(static_cast<Eigen::Index>(pre_rows.size()), x_train[m].cols());
                for (std::size_t i = 0; i < pre_rows.size(); ++i)
                    x_pre.row(static_cast<Eigen::Index>(i)) = x_train[m].row(pre_rows[i]);
                const auto model = fit_classifier(cfg.classifier, x_pre, y_pre, k);
                const double bac = balanced_accuracy(test.labels, model->predict(x_test[m]), k);
                push_record(MethodKind::Pre, ds.modalities[m].name, bac, watch.seconds());
            }
        }
        if (want_uni) {
            for (std::size_t m = 0; m < m_count; ++m) {
                StopWatch watch;
                const PseudoLabeling pl =
                    unimodal_pseudolabels(train, static_cast<int>(m), b, cfg.preprocess, cell_seed);
                const auto model = fit_classifier(cfg.classifier, x_train[m], pl.labels, k);
                const double bac = balanced_accuracy(test.labels, model->predict(x_test[m]), k);
                push_record(MethodKind::Uni, ds.modalities[m].name, bac, watch.seconds());
            }
        }
        if (want_cmcsl) {
            const PseudoLabeling pl = cmcsl_pseudolabels(train, b, cfg.preprocess, cell_seed);
            for (std::size_t m = 0; m < m_count; ++m) {
                StopWatch watch;
                const auto model = fit_classifier(cfg.classifier, x_train[m], pl.labels, k);
                const double bac = balanced_accuracy(test.labels, model->predict(x_test[m]), k);
                push_record(MethodKind::Cmcsl, ds.modalities[m].name, bac, watch.seconds());
            }
        }
    }
    return out;
}

void sort_canonical(std::vector<ResultRecord>& records) {
    std::sort(records.begin(), records.end(), [](const ResultRecord& a, const ResultRecord& b) {
        if (a.dataset != b.dataset) return a.dataset < b.dataset;
        if (a.modality != b.modality) return a.modality < b.modality;
        if (method_rank(a.method) != method_rank(b.method))
            return method_rank(a.method) < method_rank(b.method);
        if (a.b_class != b.b_class) return a.b_class < b.b_class;
        if (a.repeat != b.repeat) return a.repeat < b.repeat;
        return a.fold < b.fold;
    });
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& config) {
    config.validate();

    std::vector<MultimodalDataset> datasets;
    datasets.reserve(config.datasets.size());
    for (const auto& src : config.datasets) {
        MultimodalDataset ds =
            src.synthetic ? make_synthetic(*src.synthetic) : load_multimodal(src.manifest);
        ds.name = src.name;
        datasets.push_back(std::move(ds));
    }

    std::vector<Task> tasks;
    for (std::size_t d = 0; d < datasets.size(); ++d)
        for (int r = 0; r < config.repeats; ++r)
            for (int f = 0; f < config.folds; ++f) tasks.push_back({d, r, f});

    std::vector<std::vector<ResultRecord>> outputs(tasks.size());
    std::vector<std::string> task_errors(tasks.size());
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};

    auto worker = [&]() {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= tasks.size()) break;
            if (failed.load() && !config.keep_going) break;
            const Task& task = tasks[i];
            try {
                outputs[i] = run_task(datasets[task.dataset], config, task.repeat, task.fold);
            } catch (const std::exception& e) {
                task_errors[i] = "dataset=" + datasets[task.dataset].name +
                                 " repeat=" + std::to_string(task.repeat) +
                                 " fold=" + std::to_string(task.fold) + ": " + e.what();
                failed.store(true);
            }
        }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(config.jobs), std::max<std::size_t>(tasks.size(), 1));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    ResultTable table;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!task_errors[i].empty()) {
            if (!config.keep_going) throw std::runtime_error("experiment cell failed: " + task_errors[i]);
            table.errors.push_back(task_errors[i]);
            continue;
        }
        for (auto& rec : outputs[i]) table.records.push_back(std::move(rec));
    }
    sort_canonical(table.records);
    return table;
}

std::size_t expected_record_count(const ExperimentConfig& config,
                                  const std::vector<int>& modality_counts) {
    if (modality_counts.size() != config.datasets.size())
        throw InvalidArgument("expected_record_count: modality_counts size mismatch");
    const auto has = [&](MethodKind kind) {
        return std::find(config.methods.begin(), config.methods.end(), kind) != config.methods.end();
    };
    std::size_t budget_methods = 0;
    for (MethodKind kind : {MethodKind::Pre, MethodKind::Uni, MethodKind::Cmcsl})
        if (has(kind)) ++budget_methods;
    std::size_t total = 0;
    for (std::size_t d = 0; d < config.datasets.size(); ++d) {
        const auto m = static_cast<std::size_t>(modality_counts[d]);
        std::size_t per_fold = 0;
        if (has(MethodKind::Full)) per_fold += m;
        if (has(MethodKind::EarlyFusion)) per_fold += 1;
        if (has(MethodKind::LateFusion)) per_fold += 1;
        per_fold += budget_methods * m * config.budgets.size();
        total += per_fold * static_cast<std::size_t>(config.repeats) *
                 static_cast<std::size_t>(config.folds);
    }
    return total;
}

// --- aggregation ---

namespace {

struct CellKey {
    std::string dataset;
    std::string modality;
    MethodKind method;
    bool operator<(const CellKey& o) const {
        if (dataset != o.dataset) return dataset < o.dataset;
        if (modality != o.modality) return modality < o.modality;
        return method_rank(method) < method_rank(o.method);
    }
};

struct MeanAcc {
    double sum = 0.0;
    int count = 0;
    void add(double v) {
        sum += v;
        ++count;
    }
    double mean() const { return sum / count; }
};

}  // namespace

AggregateReport aggregate_and_test(const ResultTable& table, double alpha) {
    AggregateReport report;
    report.alpha = alpha;

    std::vector<const ResultRecord*> recs;
    recs.reserve(table.records.size());
    for (const auto& r : table.records) recs.push_back(&r);
    std::sort(recs.begin(), recs.end(), [](const ResultRecord* a, const ResultRecord* b) {
        if (a->dataset != b->dataset) return a->dataset < b->dataset;
        if (a->modality != b->modality) return a->modality < b->modality;
        if (method_rank(a->method) != method_rank(b->method))
            return method_rank(a->method) < method_rank(b->method);
        if (a->b_class != b->b_class) return a->b_class < b->b_class;
        if (a->repeat != b->repeat) return a->repeat < b->repeat;
        return a->fold < b->fold;
    });

    // Dataset metadata.
    std::map<std::string, int> dataset_classes;
    std::map<std::string, std::vector<std::string>> dataset_modalities;  // excluding "fused"
    std::set<MethodKind> methods_seen;
    std::set<int> budgets_seen;
    int max_repeat = -1;
    int max_fold = -1;
    for (const auto* r : recs) {
        dataset_classes[r->dataset] = r->n_classes;
        if (r->modality != "fused") {
            auto& mods = dataset_modalities[r->dataset];
            if (std::find(mods.begin(), mods.end(), r->modality) == mods.end())
                mods.push_back(r->modality);
        }
        methods_seen.insert(r->method);
        if (is_budget_dependent(r->method) && !r->infeasible) budgets_seen.insert(r->b_class);
        max_repeat = std::max(max_repeat, r->repeat);
        max_fold = std::max(max_fold, r->fold);
    }
    for (auto& [name, mods] : dataset_modalities) std::sort(mods.begin(), mods.end());
    report.protocol_fidelity = (max_repeat + 1 == 5) && (max_fold + 1 == 2);

    std::vector<MethodKind> methods(methods_seen.begin(), methods_seen.end());
    std::sort(methods.begin(), methods.end(),
              [](MethodKind a, MethodKind b) { return method_rank(a) < method_rank(b); });

    // Overall means and per-budget means.
    std::map<CellKey, MeanAcc> overall;
    std::map<CellKey, std::map<int, MeanAcc>> per_budget;
    std::map<CellKey, std::array<std::array<MeanAcc, 2>, 5>> fold_scores;
    for (const auto* r : recs) {
        if (r->infeasible || std::isnan(r->bac)) continue;
        const CellKey key{r->dataset, r->modality, r->method};
        overall[key].add(r->bac);
        per_budget[key][r->b_class].add(r->bac);
        if (r->repeat < 5 && r->fold < 2)
            fold_scores[key][static_cast<std::size_t>(r->repeat)][static_cast<std::size_t>(r->fold)]
                .add(r->bac);
    }

    for (const auto& [key, acc] : overall)
        report.summary.push_back({key.dataset, key.modality, key.method, acc.mean(), acc.count});

    // Budget curves; budget-independent methods are flat across the sweep.
    std::vector<int> budget_axis(budgets_seen.begin(), budgets_seen.end());
    if (budget_axis.empty()) budget_axis.push_back(0);
    for (const auto& [key, by_budget] : per_budget) {
        const bool flat = !is_budget_dependent(key.method);
        if (flat) {
            const double value = overall[key].mean();
            for (int b : budget_axis)
                report.curves.push_back({key.dataset, key.modality, key.method, b, value});
        } else {
            for (const auto& [b, acc] : by_budget)
                report.curves.push_back({key.dataset, key.modality, key.method, b, acc.mean()});
        }
    }

    // Group-average curves over datasets (per group / modality / method / budget).
    for (const bool binary : {true, false}) {
        const std::string group_ds = binary ? "all-binary" : "all-multiclass";
        std::map<std::tuple<std::string, int, int>, MeanAcc> acc;  // (modality, method_rank, b)
        for (const auto& point : report.curves) {
            auto it = dataset_classes.find(point.dataset);
            if (it == dataset_classes.end()) continue;
            if ((it->second == 2) != binary) continue;
            acc[{point.modality, method_rank(point.method), point.b_class}].add(point.mean_bac);
        }
        for (const auto& [key, mean] : acc)
            report.curves.push_back({group_ds, std::get<0>(key),
                                     kMethodOrder[static_cast<std::size_t>(std::get<1>(key))],
                                     std::get<2>(key), mean.mean()});
    }
    std::sort(report.curves.begin(), report.curves.end(), [](const CurvePoint& a, const CurvePoint& b) {
        if (a.dataset != b.dataset) return a.dataset < b.dataset;
        if (a.modality != b.modality) return a.modality < b.modality;
        if (method_rank(a.method) != method_rank(b.method))
            return method_rank(a.method) < method_rank(b.method);
        return a.b_class < b.b_class;
    });

    // Helper: budget-averaged mean of one method on one (dataset, modality)
    // stream, with fused methods broadcast into every modality.
    auto stream_mean = [&](const std::string& ds, const std::string& mod,
                           MethodKind method) -> std::optional<double> {
        const CellKey key{ds, is_fused(method) ? "fused" : mod, method};
        auto it = overall.find(key);
        if (it == overall.end()) return std::nullopt;
        return it->second.mean();
    };

    // Per-dataset pairwise combined 5x2 CV F-tests on budget-averaged scores.
    if (report.protocol_fidelity) {
        for (const auto& [ds, mods] : dataset_modalities) {
            for (const auto& mod : mods) {
                auto scores_of = [&](MethodKind method) -> std::optional<std::array<std::array<double, 2>, 5>> {
                    const CellKey key{ds, is_fused(method) ? "fused" : mod, method};
                    auto it = fold_scores.find(key);
                    if (it == fold_scores.end()) return std::nullopt;
                    std::array<std::array<double, 2>, 5> out{};
                    for (int i = 0; i < 5; ++i)
                        for (int j = 0; j < 2; ++j) {
                            const auto& acc = it->second[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                            if (acc.count == 0) return std::nullopt;
                            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = acc.mean();
                        }
                    return out;
                };
                for (std::size_t i = 0; i < methods.size(); ++i) {
                    const auto a = scores_of(methods[i]);
                    if (!a) continue;
                    for (std::size_t j = i + 1; j < methods.size(); ++j) {
                        const auto b = scores_of(methods[j]);
                        if (!b) continue;
                        ScorePair5x2 pair;
                        pair.a = *a;
                        pair.b = *b;
                        const TestOutcome outcome = combined_5x2cv_f_test(pair, alpha);
                        report.stats.push_back({"5x2cv_f", ds + ":" + mod,
                                                std::string(to_string(methods[i])),
                                                std::string(to_string(methods[j])),
                                                outcome.statistic, outcome.p_value,
                                                outcome.significant});
                    }
                }
            }
        }
    }

    // Group rank tables + global Wilcoxon. Units are (dataset x modality)
    // streams for the pooled tables, datasets for the per-modality ones.
    struct GroupSpec {
        std::string name;
        std::vector<std::pair<std::string, std::string>> units;  // (dataset, modality)
    };
    std::vector<GroupSpec> groups;
    for (const bool binary : {true, false}) {
        const std::string base = binary ? "binary" : "multiclass";
        GroupSpec pooled{base, {}};
        std::set<std::string> group_mods;
        for (const auto& [ds, mods] : dataset_modalities) {
            if ((dataset_classes[ds] == 2) != binary) continue;
            for (const auto& mod : mods) {
                pooled.units.push_back({ds, mod});
                group_mods.insert(mod);
            }
        }
        if (!pooled.units.empty()) groups.push_back(std::move(pooled));
        for (const auto& mod : group_mods) {
            GroupSpec per_mod{base + ":" + mod, {}};
            for (const auto& [ds, mods] : dataset_modalities) {
                if ((dataset_classes[ds] == 2) != binary) continue;
                if (std::find(mods.begin(), mods.end(), mod) != mods.end())
                    per_mod.units.push_back({ds, mod});
            }
            if (!per_mod.units.empty()) groups.push_back(std::move(per_mod));
        }
    }

    for (const auto& group : groups) {
        // Keep only units where every method has a score.
        std::vector<std::pair<std::string, std::string>> units;
        for (const auto& unit : group.units) {
            bool complete = true;
            for (MethodKind method : methods)
                if (!stream_mean(unit.first, unit.second, method)) {
                    complete = false;
                    break;
                }
            if (complete) units.push_back(unit);
        }
        if (units.empty() || methods.empty()) continue;

        Matrix scores(static_cast<Eigen::Index>(methods.size()), static_cast<Eigen::Index>(units.size()));
        for (std::size_t i = 0; i < methods.size(); ++i)
            for (std::size_t u = 0; u < units.size(); ++u)
                scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(u)) =
                    *stream_mean(units[u].first, units[u].second, methods[i]);

        RankTable rank_table;
        rank_table.group = group.name;
        rank_table.methods = methods;
        rank_table.ranks = mean_ranks(scores);
        rank_table.units = static_cast<int>(units.size());
        rank_table.dominated.resize(methods.size());

        for (std::size_t i = 0; i < methods.size(); ++i) {
            for (std::size_t j = i + 1; j < methods.size(); ++j) {
                std::vector<double> x(static_cast<std::size_t>(units.size()));
                std::vector<double> y(static_cast<std::size_t>(units.size()));
                for (std::size_t u = 0; u < units.size(); ++u) {
                    x[u] = scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(u));
                    y[u] = scores(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(u));
                }
                const TestOutcome outcome = wilcoxon_signed_rank(x, y, alpha);
                report.stats.push_back({"wilcoxon", group.name, std::string(to_string(methods[i])),
                                        std::string(to_string(methods[j])), outcome.statistic,
                                        outcome.p_value, outcome.significant});
                if (outcome.significant) {
                    const double mean_i = scores.row(static_cast<Eigen::Index>(i)).mean();
                    const double mean_j = scores.row(static_cast<Eigen::Index>(j)).mean();
                    if (mean_i > mean_j)
                        rank_table.dominated[i].push_back(static_cast<int>(j) + 1);
                    else if (mean_j > mean_i)
                        rank_table.dominated[j].push_back(static_cast<int>(i) + 1);
                }
            }
        }
        report.rank_tables.push_back(std::move(rank_table));
    }

    return report;
}

// --- serialization ---

void write_results_csv(const ResultTable& table, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot write " + path.string());
    file << "dataset,modality,method,classifier,preprocess,n_classes,b_class,repeat,fold,seed,"
            "prelabel_hash,status,bac\n";
    for (const auto& r : table.records) {
        file << r.dataset << ',' << r.modality << ',' << to_string(r.method) << ','
             << to_string(r.classifier) << ',' << to_string(r.preprocess) << ',' << r.n_classes
             << ',' << r.b_class << ',' << r.repeat << ',' << r.fold << ',' << r.seed << ','
             << r.prelabel_hash << ',' << (r.infeasible ? "infeasible" : "ok") << ',';
        if (!r.infeasible) file << format_g17(r.bac);
        file << '\n';
    }
}

ResultTable read_results_csv(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(file, line)) throw DataError("empty results file: " + path.string());
    ResultTable table;
    std::size_t lineno = 1;
    while (std::getline(file, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_row(line);
        if (fields.size() != 13)
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 13 fields");
        try {
            ResultRecord r;
            r.dataset = fields[0];
            r.modality = fields[1];
            r.method = parse_method_kind(fields[2]);
            r.classifier = parse_classifier_kind(fields[3]);
            r.preprocess = parse_preprocess_kind(fields[4]);
            r.n_classes = std::stoi(fields[5]);
            r.b_class = std::stoi(fields[6]);
            r.repeat = std::stoi(fields[7]);
            r.fold = std::stoi(fields[8]);
            r.seed = std::stoull(fields[9]);
            r.prelabel_hash = std::stoull(fields[10]);
            r.infeasible = fields[11] == "infeasible";
            r.bac = r.infeasible || fields[12].empty() ? std::numeric_limits<double>::quiet_NaN()
                                                       : std::stod(fields[12]);
            table.records.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed field");
        } catch (const InvalidArgument& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return table;
}

void write_curves_csv(const AggregateReport& report, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot write " + path.string());
    file << "dataset,modality,method,b_class,mean_bac\n";
    for (const auto& point : report.curves)
        file << point.dataset << ',' << point.modality << ',' << to_string(point.method) << ','
             << point.b_class << ',' << format_g17(point.mean_bac) << '\n';
}

void write_stats_csv(const AggregateReport& report, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot write " + path.string());
    file << "test,group,method_a,method_b,statistic,p_value,significant\n";
    for (const auto& s : report.stats)
        file << s.test << ',' << s.group << ',' << s.method_a << ',' << s.method_b << ','
             << format_g17(s.statistic) << ',' << format_g17(s.p_value) << ','
             << (s.significant ? "true" : "false") << '\n';
}

void write_summary_md(const AggregateReport& report, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) throw DataError("cannot write " + path.string());
    file << "# Results summary\n\n";
    file << "- protocol: " << (report.protocol_fidelity ? "5x2 stratified CV" : "NON-STANDARD (not 5x2)")
         << "\n- alpha: " << format_fixed(report.alpha, 2) << "\n\n";

    // Mean BAC table, one row per (dataset, modality).
    std::vector<MethodKind> methods;
    for (const auto& row : report.summary)
        if (std::find(methods.begin(), methods.end(), row.method) == methods.end())
            methods.push_back(row.method);
    std::sort(methods.begin(), methods.end(),
              [](MethodKind a, MethodKind b) { return method_rank(a) < method_rank(b); });

    file << "## Mean balanced accuracy\n\n";
    file << "| dataset | modality |";
    for (MethodKind m : methods) file << ' ' << to_string(m) << " |";
    file << "\n|---|---|";
    for (std::size_t i = 0; i < methods.size(); ++i) file << "---|";
    file << '\n';
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& row : report.summary) {
        const auto key = std::make_pair(row.dataset, row.modality);
        if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
    }
    std::sort(rows.begin(), rows.end());
    for (const auto& [ds, mod] : rows) {
        file << "| " << ds << " | " << mod << " |";
        for (MethodKind m : methods) {
            const auto it = std::find_if(report.summary.begin(), report.summary.end(),
                                         [&](const SummaryRow& r) {
                                             return r.dataset == ds && r.modality == mod && r.method == m;
                                         });
            if (it == report.summary.end()) file << " --- |";
            else file << ' ' << format_fixed(it->mean_bac, 3) << " |";
        }
        file << '\n';
    }
    file << '\n';

    // Rank tables: mean rank row, then the indices of dominated methods.
    for (const auto& table : report.rank_tables) {
        file << "## Ranks: " << table.group << " (" << table.units << " units)\n\n";
        file << "| |";
        for (std::size_t i = 0; i < table.methods.size(); ++i)
            file << ' ' << to_string(table.methods[i]) << "^" << (i + 1) << " |";
        file << "\n|---|";
        for (std::size_t i = 0; i < table.methods.size(); ++i) file << "---|";
        file << "\n| mean rank |";
        for (double r : table.ranks) file << ' ' << format_fixed(r, 3) << " |";
        file << "\n| beats |";
        for (std::size_t i = 0; i < table.methods.size(); ++i) {
            const auto& dom = table.dominated[i];
            if (dom.empty()) {
                file << " --- |";
            } else if (dom.size() == table.methods.size() - 1) {
                file << " all |";
            } else {
                file << ' ';
                for (std::size_t j = 0; j < dom.size(); ++j) {
                    if (j) file << ", ";
                    file << dom[j];
                }
                file << " |";
            }
        }
        file << "\n\n";
    }
}

}  // namespace cmcsl
