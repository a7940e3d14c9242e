#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmcsl/classifiers.hpp"
#include "cmcsl/common.hpp"
#include "cmcsl/dataset.hpp"
#include "cmcsl/evalstats.hpp"
#include "cmcsl/preprocess.hpp"

namespace cmcsl {

enum class MethodKind { Full, EarlyFusion, LateFusion, Pre, Uni, Cmcsl };

MethodKind parse_method_kind(std::string_view text);  // full|ef|lf|pre|uni|cmcsl
std::string_view to_string(MethodKind kind);
std::vector<MethodKind> parse_method_list(std::string_view csv);

/// PRE/UNI/CMCSL consume the labeling budget; the others train fully labeled.
bool is_budget_dependent(MethodKind kind);
/// EF/LF produce one fused prediction stream instead of per-modality ones.
bool is_fused(MethodKind kind);

struct DatasetSource {
    std::string name;
    std::filesystem::path manifest;  // empty when synthetic
    std::optional<SyntheticSpec> synthetic;
};

struct ExperimentConfig {
    std::vector<DatasetSource> datasets;
    ClassifierKind classifier = ClassifierKind::Gnb;
    PreprocessKind preprocess = PreprocessKind::L2Std;
    std::vector<int> budgets;  // default 1..20
    int repeats = 5;
    int folds = 2;  // the protocol is two-fold; other values are rejected
    std::uint64_t master_seed = 0;
    std::vector<MethodKind> methods;  // default: all six
    int jobs = 1;
    bool keep_going = false;

    ExperimentConfig();
    void validate() const;
    bool protocol_fidelity() const { return repeats == 5 && folds == 2; }
};

/// "1-20", "1,3,5" or any comma mix of values and ranges.
std::vector<int> parse_budget_list(std::string_view text);

/// Config JSON mirroring ExperimentConfig; paths resolve relative to the file.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// One long-form experiment cell. Budget-independent methods are recorded
/// once per (repeat, fold) with b_class = 0. Cells whose training fold cannot
/// afford the budget are kept but flagged infeasible and excluded from
/// aggregation. wall_time_s is measured but never serialized, so results.csv
/// stays byte-identical across reruns.
struct ResultRecord {
    std::string dataset;
    std::string modality;  // modality name, or "fused" for EF/LF
    MethodKind method = MethodKind::Full;
    ClassifierKind classifier = ClassifierKind::Gnb;
    PreprocessKind preprocess = PreprocessKind::Raw;
    int n_classes = 0;
    int b_class = 0;
    int repeat = 0;
    int fold = 0;
    std::uint64_t seed = 0;           // cell seed (budget methods), else fold seed
    std::uint64_t prelabel_hash = 0;  // hash of the ascending pre-label indices
    bool infeasible = false;
    double bac = 0.0;
    double wall_time_s = 0.0;
};

struct ResultTable {
    std::vector<ResultRecord> records;
    std::vector<std::string> errors;  // populated only under keep_going
};

/// Runs the full dataset x repeat x fold x budget x method grid. Deterministic
/// for a given (config, master_seed) regardless of the worker count.
ResultTable run_experiment(const ExperimentConfig& config);

/// Closed-form record count for a config (modality_counts per dataset).
std::size_t expected_record_count(const ExperimentConfig& config,
                                  const std::vector<int>& modality_counts);

// --- aggregation ---

struct SummaryRow {
    std::string dataset;
    std::string modality;
    MethodKind method;
    double mean_bac = 0.0;
    int cells = 0;
};

struct CurvePoint {
    std::string dataset;  // dataset name, or "all-binary"/"all-multiclass"
    std::string modality;
    MethodKind method;
    int b_class = 0;
    double mean_bac = 0.0;
};

struct StatRecord {
    std::string test;   // "5x2cv_f" or "wilcoxon"
    std::string group;  // "<dataset>:<modality>", "binary", "binary:<modality>", ...
    std::string method_a;
    std::string method_b;
    double statistic = 0.0;
    double p_value = 1.0;
    bool significant = false;
};

struct RankTable {
    std::string group;
    std::vector<MethodKind> methods;
    std::vector<double> ranks;
    std::vector<std::vector<int>> dominated;  // per method, 1-based column indices it beats
    int units = 0;                            // columns ranked
};

struct AggregateReport {
    std::vector<SummaryRow> summary;
    std::vector<CurvePoint> curves;
    std::vector<StatRecord> stats;
    std::vector<RankTable> rank_tables;
    bool protocol_fidelity = true;
    double alpha = 0.05;
};

/// Means per (dataset, modality, method); per-dataset pairwise combined
/// 5x2 CV F-tests on budget-averaged fold scores; global Wilcoxon with mean
/// ranks within the binary and multiclass groups, pooled over modalities and
/// per modality. Fused methods are broadcast into every modality stream for
/// comparison purposes.
AggregateReport aggregate_and_test(const ResultTable& table, double alpha = 0.05);

// --- serialization ---

void write_results_csv(const ResultTable& table, const std::filesystem::path& path);
ResultTable read_results_csv(const std::filesystem::path& path);
void write_curves_csv(const AggregateReport& report, const std::filesystem::path& path);
void write_stats_csv(const AggregateReport& report, const std::filesystem::path& path);
void write_summary_md(const AggregateReport& report, const std::filesystem::path& path);

}  // namespace cmcsl
