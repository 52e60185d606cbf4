#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "amosl/audit.hpp"
#include "amosl/checkpoint.hpp"
#include "amosl/config.hpp"
#include "amosl/dataset.hpp"
#include "amosl/errors.hpp"
#include "amosl/metrics.hpp"
#include "amosl/trainer.hpp"

namespace {

using amosl::TrainConfig;

struct TrainArgs {
    std::string config_path;
    std::size_t folds = 10;
    std::string out_dir = ".";
    std::string reg_update = "batch";
    bool timing = false;
    bool verbose = false;
};

int cmd_prepare(const std::string& data_dir, const std::string& name, std::uint64_t seed,
                const std::string& out) {
    const amosl::RawDataset raw = amosl::parse_tudataset(data_dir, name);
    const amosl::PreparedDataset ds = amosl::prepare_dataset(raw, seed);
    amosl::save_prepared(ds, out);
    std::cout << name << ": " << ds.graphs.size() << " graphs, " << ds.classes << " classes, "
              << ds.feature_dim << " features, mean |V| = " << std::fixed << std::setprecision(2)
              << raw.mean_vertices() << "\n"
              << "wrote " << out << "\n";
    return 0;
}

int cmd_train(const TrainArgs& args) {
    TrainConfig cfg = TrainConfig::from_file(args.config_path);
    cfg.validate();
    const amosl::PreparedDataset ds = amosl::load_prepared(cfg.dataset);

    namespace fs = std::filesystem;
    fs::create_directories(args.out_dir);
    amosl::MetricsWriter metrics((fs::path(args.out_dir) / "metrics.ndjson").string());

    amosl::TrainHooks hooks;
    hooks.metrics = &metrics;
    hooks.reg_update = amosl::reg_update_from(args.reg_update);
    hooks.timing = args.timing;
    if (args.verbose) hooks.progress = &std::cout;

    std::vector<amosl::FoldResult> folds;
    const amosl::Report rep = amosl::cross_validate(ds, cfg, args.folds, hooks, &folds);

    for (const amosl::FoldResult& f : folds) {
        const fs::path ckpt = fs::path(args.out_dir) / ("fold_" + std::to_string(f.fold) + ".ckpt");
        amosl::save_checkpoint(f.params, ckpt.string());
        std::cout << "fold " << f.fold << ": test_acc " << f.test_accuracy << " train_acc "
                  << f.train_accuracy << " final_ot " << f.final_train_ot << "\n";
    }

    nlohmann::ordered_json j;
    j["run_id"] = rep.run_id;
    j["dataset"] = ds.name;
    j["folds"] = rep.folds;
    j["fold_accuracy"] = rep.fold_accuracy;
    j["mean_accuracy"] = rep.mean_accuracy;
    j["std_accuracy"] = rep.std_accuracy;
    j["mean_final_train_ot"] = rep.mean_final_train_ot;
    j["mean_final_test_ot"] = rep.mean_final_test_ot;
    const fs::path report_path = fs::path(args.out_dir) / "report.json";
    std::ofstream report(report_path);
    if (!report) throw amosl::DataError("cannot write " + report_path.string());
    report << j.dump(2) << "\n";

    std::cout << "accuracy " << std::fixed << std::setprecision(1) << 100.0 * rep.mean_accuracy
              << " ± " << 100.0 * rep.std_accuracy << " (run " << rep.run_id << ")\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path) {
    const amosl::ModelParams params = amosl::load_checkpoint(model_path);
    const amosl::PreparedDataset ds = amosl::load_prepared(data_path);
    TrainConfig cfg;  // evaluation settings; the checkpoint fixes the model itself
    const amosl::EvalSummary sum = amosl::evaluate_dataset(ds, params, cfg);
    std::cout << "graphs " << sum.count << " correct " << sum.correct << " accuracy "
              << sum.accuracy << " mean_l0 " << sum.mean_l0 << " mean_ot " << sum.mean_structure
              << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& mode, double eps) {
    amosl::AuditFilter filter = amosl::AuditFilter::All;
    if (mode == "envelope") filter = amosl::AuditFilter::EnvelopeOnly;
    else if (mode == "kkt_qp") filter = amosl::AuditFilter::KktQpOnly;
    else if (!mode.empty()) throw amosl::ValueError("unknown mode '" + mode + "'");
    const amosl::AuditSuite suite = amosl::run_gradient_audit(eps, filter);
    amosl::print_suite(suite, std::cout);
    return suite.all_passed() ? 0 : 1;
}

int cmd_ablate(const std::string& config_path, const std::string& axis, std::size_t folds,
               const std::string& out_dir, bool verbose) {
    TrainConfig cfg = TrainConfig::from_file(config_path);
    cfg.validate();
    const amosl::PreparedDataset ds = amosl::load_prepared(cfg.dataset);

    amosl::TrainHooks hooks;
    if (verbose) hooks.progress = &std::cout;
    const auto cells =
        amosl::run_ablation(ds, cfg, amosl::ablation_axis_from(axis), folds, hooks);

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const amosl::AblationCell& c : cells) {
        std::cout << std::left << std::setw(32) << c.label << " accuracy " << std::fixed
                  << std::setprecision(1) << 100.0 * c.report.mean_accuracy << " ± "
                  << 100.0 * c.report.std_accuracy << "  final_ot " << std::setprecision(4)
                  << c.report.mean_final_train_ot << "\n";
        nlohmann::ordered_json row;
        row["label"] = c.label;
        row["mean_accuracy"] = c.report.mean_accuracy;
        row["std_accuracy"] = c.report.std_accuracy;
        row["mean_final_train_ot"] = c.report.mean_final_train_ot;
        row["run_id"] = c.report.run_id;
        rows.push_back(std::move(row));
    }
    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        const fs::path path = fs::path(out_dir) / ("ablation_" + axis + ".json");
        std::ofstream out(path);
        if (!out) throw amosl::DataError("cannot write " + path.string());
        out << rows.dump(2) << "\n";
    }
    return 0;
}

int cmd_ot_oracle(std::size_t trials, std::uint64_t seed) {
    const amosl::OracleResult res = amosl::run_ot_oracle(trials, seed);
    std::cout << "trials " << res.trials << " mismatches " << res.mismatches << " max_gap "
              << std::scientific << res.max_gap << " tol " << res.tol << "\n";
    return res.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive modality-wise structure learning for graph classification"};
    app.require_subcommand(1);

    std::string data_dir, name, out_file = "prepared.bin";
    std::uint64_t seed = 1;
    auto* prepare = app.add_subcommand("prepare", "Parse a TUDataset and synthesize modality 2");
    prepare->add_option("--data-dir", data_dir, "Directory with the dataset files")->required();
    prepare->add_option("--name", name, "Dataset name, e.g. MUTAG")->required();
    prepare->add_option("--seed", seed, "Modality synthesis seed");
    prepare->add_option("--out", out_file, "Output file");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Cross-validated training");
    train->add_option("--config", train_args.config_path, "Config file")->required();
    train->add_option("--folds", train_args.folds, "Fold count");
    train->add_option("--out", train_args.out_dir, "Output directory");
    train->add_option("--reg-update", train_args.reg_update, "reg cadence: batch|epoch");
    train->add_flag("--timing", train_args.timing, "Record wall-clock times in metrics");
    train->add_flag("--verbose", train_args.verbose, "Per-epoch progress lines");

    std::string model_path, data_path;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a prepared dataset");
    eval->add_option("--model", model_path, "Checkpoint file")->required();
    eval->add_option("--data", data_path, "Prepared dataset file")->required();

    std::string gc_mode;
    double gc_eps = 1e-3;
    auto* gradcheck = app.add_subcommand("gradcheck", "Run the gradient-audit suite");
    gradcheck->add_option("--mode", gc_mode, "Restrict to envelope|kkt_qp transport cases");
    gradcheck->add_option("--eps", gc_eps, "kkt_qp damping");

    std::string ab_config, ab_axis, ab_out;
    std::size_t ab_folds = 10;
    bool ab_verbose = false;
    auto* ablate = app.add_subcommand("ablate", "Matched-configuration comparisons");
    ablate->add_option("--axis", ab_axis, "distance|adaptive|fusion")->required();
    ablate->add_option("--config", ab_config, "Config file")->required();
    ablate->add_option("--folds", ab_folds, "Fold count");
    ablate->add_option("--out", ab_out, "Directory for the JSON table");
    ablate->add_flag("--verbose", ab_verbose, "Per-epoch progress lines");

    std::size_t trials = 500;
    std::uint64_t oracle_seed = 1;
    auto* oracle = app.add_subcommand("ot-oracle", "LP vs brute-force equivalence check");
    oracle->add_option("--trials", trials, "Instance count");
    oracle->add_option("--seed", oracle_seed, "Generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (prepare->parsed()) return cmd_prepare(data_dir, name, seed, out_file);
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(model_path, data_path);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_mode, gc_eps);
        if (ablate->parsed()) return cmd_ablate(ab_config, ab_axis, ab_folds, ab_out, ab_verbose);
        if (oracle->parsed()) return cmd_ot_oracle(trials, oracle_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
