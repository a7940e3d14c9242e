// Command-line driver: synthetic data generation, manifest validation,
// pseudo-label dumps, the full experiment grid, and re-aggregation of saved
// results. Exit codes: 0 success, 1 usage, 2 data error, 3 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmcsl/classifiers.hpp"
#include "cmcsl/dataset.hpp"
#include "cmcsl/preprocess.hpp"
#include "cmcsl/propagate.hpp"
#include "cmcsl/protocol.hpp"

namespace fs = std::filesystem;
using namespace cmcsl;

namespace {

SyntheticModality parse_mod_spec(const std::string& text) {
    // name:dim:separation:stddev
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    if (parts.size() != 4)
        throw InvalidArgument("--mod expects name:dim:separation:stddev, got '" + text + "'");
    SyntheticModality mod;
    mod.name = parts[0];
    mod.dim = std::stoi(parts[1]);
    mod.separation = std::stod(parts[2]);
    mod.stddev = std::stod(parts[3]);
    return mod;
}

std::string_view provenance_name(const ProvenanceTag& tag) {
    switch (tag.kind) {
        case Provenance::Prelabeled: return "prelabeled";
        case Provenance::Agreed: return "agreed";
        case Provenance::Resolved: return "resolved";
    }
    return "?";
}

int cmd_synth(const SyntheticSpec& spec, const fs::path& out_dir) {
    const MultimodalDataset dataset = make_synthetic(spec);
    const auto manifest = save_multimodal(dataset, out_dir);
    std::cout << "wrote " << manifest.string() << "\n"
              << "  instances: " << dataset.size() << "\n"
              << "  classes:   " << dataset.n_classes << "\n";
    for (const auto& view : dataset.modalities)
        std::cout << "  modality " << view.name << ": d=" << view.dim() << "\n";
    return 0;
}

int cmd_validate(const fs::path& manifest) {
    const MultimodalDataset dataset = load_multimodal(manifest);
    std::cout << "ok: " << dataset.name << " N=" << dataset.size()
              << " classes=" << dataset.n_classes;
    for (const auto& view : dataset.modalities)
        std::cout << " " << view.name << "(d=" << view.dim() << ")";
    std::cout << "\n";
    return 0;
}

int cmd_pseudolabel(const fs::path& manifest, int b_class, PreprocessKind kind,
                    std::uint64_t seed, const fs::path& out) {
    const MultimodalDataset dataset = load_multimodal(manifest);
    const PseudoLabeling pl = cmcsl_pseudolabels(dataset, b_class, kind, seed);

    std::ofstream file(out);
    if (!file) throw DataError("cannot write " + out.string());
    file << "instance,y_true";
    for (const auto& view : dataset.modalities) file << ",y_raw_" << view.name;
    file << ",y_cm,provenance\n";
    for (std::size_t i = 0; i < pl.labels.size(); ++i) {
        file << i << ',' << dataset.labels[i];
        for (const auto& raw : pl.raw_labels) file << ',' << raw[i];
        file << ',' << pl.labels[i] << ',' << provenance_name(pl.provenance[i]);
        if (pl.provenance[i].kind == Provenance::Resolved)
            file << '(' << dataset.modalities[static_cast<std::size_t>(pl.provenance[i].modality)].name
                 << ')';
        file << '\n';
    }

    std::size_t agreed = 0, resolved = 0, prelabeled = 0, correct = 0;
    for (std::size_t i = 0; i < pl.labels.size(); ++i) {
        switch (pl.provenance[i].kind) {
            case Provenance::Agreed: ++agreed; break;
            case Provenance::Resolved: ++resolved; break;
            case Provenance::Prelabeled: ++prelabeled; break;
        }
        if (pl.labels[i] == dataset.labels[i]) ++correct;
    }
    const double n = static_cast<double>(pl.labels.size());
    std::cout << "instances:  " << pl.labels.size() << "\n"
              << "prelabeled: " << prelabeled << "\n"
              << "agreed:     " << agreed << " (" << agreed / n << ")\n"
              << "resolved:   " << resolved << " (" << resolved / n << ")\n"
              << "pseudo-label accuracy vs true labels: " << correct / n << "\n"
              << "wrote " << out.string() << "\n";
    return 0;
}

int run_and_report(const ExperimentConfig& config, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const ResultTable table = run_experiment(config);
    for (const auto& err : table.errors) std::cerr << "cell skipped: " << err << "\n";
    const AggregateReport report = aggregate_and_test(table);
    write_results_csv(table, out_dir / "results.csv");
    write_curves_csv(report, out_dir / "curves.csv");
    write_stats_csv(report, out_dir / "stats.csv");
    write_summary_md(report, out_dir / "summary.md");
    std::cout << "records: " << table.records.size() << "\n"
              << "wrote " << (out_dir / "results.csv").string() << ", curves.csv, stats.csv, summary.md\n";
    // Under --keep-going a partially successful run still counts; a run that
    // produced nothing does not.
    return table.records.empty() && !table.errors.empty() ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-modality clustering-based self-labeling for multimodal tabular data"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic multimodal dataset");
    int synth_classes = 2;
    int synth_per_class = 50;
    std::uint64_t synth_seed = 0;
    std::vector<std::string> synth_mods;
    std::string synth_name = "synthetic";
    std::string synth_out = "synth-out";
    synth->add_option("--classes", synth_classes, "Number of classes")->check(CLI::PositiveNumber);
    synth->add_option("--per-class", synth_per_class, "Instances per class")->check(CLI::PositiveNumber);
    synth->add_option("--mod", synth_mods, "Modality spec name:dim:separation:stddev (repeatable)")
        ->required()
        ->expected(-2);
    synth->add_option("--seed", synth_seed, "RNG seed");
    synth->add_option("--name", synth_name, "Dataset name");
    synth->add_option("--out", synth_out, "Output directory");

    // validate
    auto* validate = app.add_subcommand("validate", "Check a manifest without running anything");
    std::string validate_manifest;
    validate->add_option("manifest", validate_manifest, "Manifest path")->required();

    // pseudolabel
    auto* pseudo = app.add_subcommand("pseudolabel", "Dump cross-modal pseudo-labels for a dataset");
    std::string pseudo_manifest;
    int pseudo_b = 1;
    std::string pseudo_prep = "l2std";
    std::uint64_t pseudo_seed = 0;
    std::string pseudo_out = "pseudolabels.csv";
    pseudo->add_option("--manifest", pseudo_manifest, "Manifest path")->required();
    pseudo->add_option("--b-class", pseudo_b, "Pre-labeled instances per class")->check(CLI::PositiveNumber);
    pseudo->add_option("--preprocess", pseudo_prep, "raw|l2|std|mm|l2std");
    pseudo->add_option("--seed", pseudo_seed, "RNG seed");
    pseudo->add_option("--dump-pseudolabels", pseudo_out, "Output CSV path");

    // run
    auto* run = app.add_subcommand("run", "Run the experiment grid and write reports");
    std::string run_config;
    std::vector<std::string> run_manifests;
    std::string run_methods, run_budgets, run_prep, run_clf;
    std::optional<std::uint64_t> run_seed;
    std::optional<int> run_repeats;
    int run_jobs = 0;
    bool run_keep_going = false;
    std::string run_out = "results";
    run->add_option("--config", run_config, "Experiment config JSON");
    run->add_option("--manifest", run_manifests, "Dataset manifest(s), alternative to --config");
    run->add_option("--methods", run_methods, "Comma list of full,ef,lf,pre,uni,cmcsl");
    run->add_option("--budgets", run_budgets, "Budgets, e.g. 1-20 or 1,3,5");
    run->add_option("--preprocess", run_prep, "raw|l2|std|mm|l2std");
    run->add_option("--classifier", run_clf, "gnb|lr|cart");
    run->add_option("--seed", run_seed, "Master seed");
    run->add_option("--repeats", run_repeats, "CV repeats (5 is the standard protocol)");
    run->add_option("--jobs", run_jobs, "Parallel workers over (dataset, repeat, fold) tasks");
    run->add_flag("--keep-going", run_keep_going, "Skip failing cells instead of aborting");
    run->add_option("--out", run_out, "Output directory");

    // report
    auto* rep = app.add_subcommand("report", "Re-aggregate a saved results.csv");
    std::string rep_results;
    std::string rep_out = "results";
    rep->add_option("--results", rep_results, "results.csv path")->required();
    rep->add_option("--out", rep_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            SyntheticSpec spec;
            spec.name = synth_name;
            spec.n_classes = synth_classes;
            spec.samples_per_class = synth_per_class;
            spec.seed = synth_seed;
            for (const auto& text : synth_mods) spec.modalities.push_back(parse_mod_spec(text));
            return cmd_synth(spec, synth_out);
        }
        if (validate->parsed()) return cmd_validate(validate_manifest);
        if (pseudo->parsed())
            return cmd_pseudolabel(pseudo_manifest, pseudo_b, parse_preprocess_kind(pseudo_prep),
                                   pseudo_seed, pseudo_out);
        if (run->parsed()) {
            ExperimentConfig config;
            if (!run_config.empty()) {
                config = load_experiment_config(run_config);
            } else if (!run_manifests.empty()) {
                for (const auto& m : run_manifests) {
                    DatasetSource src;
                    src.manifest = m;
                    src.name = fs::path(m).parent_path().filename().string();
                    if (src.name.empty()) src.name = fs::path(m).stem().string();
                    config.datasets.push_back(std::move(src));
                }
            } else {
                std::cerr << "run: need --config or at least one --manifest\n";
                return 1;
            }
            if (!run_methods.empty()) config.methods = parse_method_list(run_methods);
            if (!run_budgets.empty()) config.budgets = parse_budget_list(run_budgets);
            if (!run_prep.empty()) config.preprocess = parse_preprocess_kind(run_prep);
            if (!run_clf.empty()) config.classifier = parse_classifier_kind(run_clf);
            if (run_seed) config.master_seed = *run_seed;
            if (run_repeats) config.repeats = *run_repeats;
            if (run_jobs > 0) config.jobs = run_jobs;
            config.keep_going = run_keep_going;
            config.validate();
            return run_and_report(config, run_out);
        }
        if (rep->parsed()) {
            fs::create_directories(rep_out);
            const ResultTable table = read_results_csv(rep_results);
            const AggregateReport report = aggregate_and_test(table);
            write_curves_csv(report, fs::path(rep_out) / "curves.csv");
            write_stats_csv(report, fs::path(rep_out) / "stats.csv");
            write_summary_md(report, fs::path(rep_out) / "summary.md");
            std::cout << "wrote " << (fs::path(rep_out) / "summary.md").string() << "\n";
            return 0;
        }
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
