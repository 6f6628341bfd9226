// Command-line front end: run experiments, trace penalties, check datasets.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vfpen/bench.hpp"
#include "vfpen/errors.hpp"
#include "vfpen/sha256.hpp"

namespace {

struct CliFlags {
    std::string config_path;
    std::vector<std::string> datasets;
    std::string learner;
    std::size_t m = 0;
    std::vector<std::size_t> fold_counts;
    std::vector<double> alphas;
    std::vector<std::string> methods;
    std::size_t realisations = 0;
    bool seed_set = false;
    std::uint64_t seed = 0;
    std::string out_dir = "vfpen_out";
    std::string format = "csv";
    std::string data_dir;
    std::size_t threads = 0;
    double learn_fraction = -1.0;
    std::string standardize_mode;
    std::size_t min_leaf = 0;
    std::string loss;
    bool emit_manifests = false;
};

void add_common_flags(CLI::App* cmd, CliFlags& flags) {
    cmd->add_option("--config", flags.config_path,
                    "JSON config file; its values override the flags below");
    cmd->add_option("--dataset", flags.datasets, "dataset names or CSV paths")
        ->delimiter(',');
    cmd->add_option("--learner", flags.learner, "cart | svr");
    cmd->add_option("--m", flags.m, "subsample size");
    cmd->add_option("--V", flags.fold_counts, "fold counts, e.g. 2,4,6")->delimiter(',');
    cmd->add_option("--alpha", flags.alphas, "PenVF constant multipliers")->delimiter(',');
    cmd->add_option("--methods", flags.methods, "vfcv,penvf,penvf+,ideal")->delimiter(',');
    cmd->add_option("--realisations", flags.realisations, "number of learn/test splits");
    cmd->add_option("--seed", flags.seed, "master seed")->each([&flags](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--format", flags.format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--data-dir", flags.data_dir,
                    "directory with fetched datasets (default: $VFPEN_DATA_DIR or ./data)");
    cmd->add_option("--threads", flags.threads, "worker threads (0 = hardware)");
    cmd->add_option("--learn-fraction", flags.learn_fraction,
                    "learn split fraction (default: registry value)");
    cmd->add_option("--standardize", flags.standardize_mode, "full | train");
    cmd->add_option("--min-leaf", flags.min_leaf, "CART minimum leaf size");
    cmd->add_option("--loss", flags.loss, "evaluation loss (mae)");
    cmd->add_flag("--emit-manifests", flags.emit_manifests,
                  "also write the learn/test split manifests (manifests.json)");
}

vfpen::ExperimentConfig config_from_flags(const CliFlags& flags) {
    vfpen::ExperimentConfig cfg;
    if (!flags.datasets.empty()) cfg.datasets = flags.datasets;
    if (!flags.learner.empty()) cfg.learner = vfpen::learner_from_string(flags.learner);
    if (flags.m) cfg.subsample_size = flags.m;
    if (!flags.fold_counts.empty()) cfg.fold_counts = flags.fold_counts;
    if (!flags.alphas.empty()) cfg.alphas = flags.alphas;
    if (!flags.methods.empty()) {
        cfg.methods.clear();
        for (const std::string& m : flags.methods)
            cfg.methods.push_back(vfpen::method_from_string(m));
    }
    if (flags.realisations) cfg.realisations = flags.realisations;
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.threads) cfg.threads = flags.threads;
    if (flags.learn_fraction >= 0.0) cfg.learn_fraction = flags.learn_fraction;
    if (!flags.standardize_mode.empty()) cfg.standardize_mode = flags.standardize_mode;
    if (flags.min_leaf) cfg.min_leaf = flags.min_leaf;
    if (!flags.loss.empty()) cfg.loss = flags.loss;

    if (!flags.data_dir.empty()) {
        cfg.data_dir = flags.data_dir;
    } else if (const char* env = std::getenv("VFPEN_DATA_DIR")) {
        cfg.data_dir = env;
    } else {
        cfg.data_dir = "data";
    }

    // The config file takes precedence over command-line flags.
    if (!flags.config_path.empty()) {
        std::ifstream in(flags.config_path);
        if (!in) throw vfpen::IoError("cannot open config '" + flags.config_path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw vfpen::ParseError("config '" + flags.config_path + "': " + e.what());
        }
        from_json(j, cfg);
    }
    return cfg;
}

int cmd_run(const CliFlags& flags) {
    const vfpen::ExperimentConfig cfg = config_from_flags(flags);
    const vfpen::ExperimentReport report = vfpen::run_experiment(cfg);

    const std::filesystem::path out_dir = flags.out_dir;
    std::filesystem::create_directories(out_dir);
    if (flags.format == "csv") {
        vfpen::write_report_csv(report, out_dir / "report.csv");
        std::ofstream wins(out_dir / "wins.csv");
        if (!wins) throw vfpen::IoError("cannot write wins.csv");
        vfpen::write_wins_csv(vfpen::win_draw_loss_table(report), wins);
        std::cout << "wrote " << (out_dir / "report.csv").string() << " and wins.csv\n";
    } else {
        std::ofstream out(out_dir / "report.json");
        if (!out) throw vfpen::IoError("cannot write report.json");
        out << vfpen::report_to_json(report).dump(2) << '\n';
        std::cout << "wrote " << (out_dir / "report.json").string() << '\n';
    }
    {
        std::ofstream echo(out_dir / "config.json");
        nlohmann::json j;
        to_json(j, cfg);
        echo << j.dump(2) << '\n';
    }
    if (flags.emit_manifests) {
        std::ofstream manifests(out_dir / "manifests.json");
        if (!manifests) throw vfpen::IoError("cannot write manifests.json");
        manifests << vfpen::experiment_manifests(cfg).dump() << '\n';
    }
    return 0;
}

int cmd_trace(const CliFlags& flags) {
    const vfpen::ExperimentConfig cfg = config_from_flags(flags);
    const auto rows = vfpen::penalty_gap_trace(cfg);
    const vfpen::HyperGrid grid = vfpen::build_grid(cfg.learner, cfg.grid);

    const std::filesystem::path out_dir = flags.out_dir;
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "trace.jsonl");
        if (!out) throw vfpen::IoError("cannot write trace.jsonl");
        vfpen::write_trace_jsonl(rows, grid, out);
    }
    {
        std::ofstream out(out_dir / "trace.csv");
        if (!out) throw vfpen::IoError("cannot write trace.csv");
        vfpen::write_trace_csv(rows, grid, out);
    }
    std::cout << "wrote " << rows.size() << " trace rows to " << out_dir.string() << '\n';
    return 0;
}

int cmd_fetch(const std::string& name, const CliFlags& flags) {
    std::filesystem::path data_dir = flags.data_dir.empty()
                                         ? (std::getenv("VFPEN_DATA_DIR")
                                                ? std::getenv("VFPEN_DATA_DIR")
                                                : "data")
                                         : flags.data_dir;
    if (name.empty()) {
        std::cout << "registered datasets:\n";
        for (const auto& info : vfpen::dataset_registry())
            std::cout << "  " << info.name << (info.synthetic ? " (synthetic)" : "")
                      << "  learn=" << info.learn_size << " test=" << info.test_size
                      << " d=" << info.dims << '\n';
        return 0;
    }
    const vfpen::DatasetInfo* info = vfpen::find_dataset(name);
    if (!info) {
        std::cerr << "unknown dataset '" << name << "'\n";
        return 1;
    }
    if (info->synthetic) {
        std::cout << name << " is synthetic; no fetch needed.\n";
        return 0;
    }
    const std::filesystem::path file = data_dir / info->expected_file;
    if (!std::filesystem::exists(file)) {
        std::cerr << vfpen::fetch_instructions(*info, data_dir) << '\n';
        return 1;
    }
    const std::string digest = vfpen::sha256_file(file);
    std::cout << file.string() << "\n  sha256: " << digest << '\n';
    const std::filesystem::path sidecar = file.string() + ".sha256";
    if (std::filesystem::exists(sidecar)) {
        std::ifstream in(sidecar);
        std::string expected;
        in >> expected;
        if (expected == digest) {
            std::cout << "  checksum matches " << sidecar.filename().string() << '\n';
        } else {
            std::cerr << "  checksum MISMATCH: expected " << expected << '\n';
            return 1;
        }
    }
    const vfpen::Dataset ds = vfpen::load_csv(file);
    std::cout << "  rows: " << ds.n() << ", features: " << ds.d() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"V-fold cross-validation and V-fold penalisation benchmarks"};
    app.require_subcommand(1);

    CliFlags run_flags, trace_flags, fetch_flags;
    std::string fetch_name;

    CLI::App* run = app.add_subcommand("run", "run the model-selection experiment");
    add_common_flags(run, run_flags);
    CLI::App* trace = app.add_subcommand(
        "trace-penalty", "emit per-grid-point ideal vs V-fold penalty rows");
    add_common_flags(trace, trace_flags);
    CLI::App* fetch = app.add_subcommand("fetch-data", "dataset fetch instructions/checksums");
    fetch->add_option("name", fetch_name, "dataset name (empty lists the registry)");
    fetch->add_option("--data-dir", fetch_flags.data_dir, "directory with fetched datasets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_flags);
        if (trace->parsed()) return cmd_trace(trace_flags);
        if (fetch->parsed()) return cmd_fetch(fetch_name, fetch_flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
