#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "vfpen/model_select.hpp"
#include "vfpen/stats.hpp"
#include "vfpen/synthetic.hpp"

namespace vfpen {

// Registry entry: either a synthetic generator (always resolvable, keeps the
// suite runnable offline) or a benchmark source to fetch by hand. Licensing
// keeps the raw benchmark files out of the repository.
struct DatasetInfo {
    std::string name;
    bool synthetic = false;
    SyntheticSpec spec;         // synthetic entries
    std::string source_url;     // fetched entries
    std::string expected_file;  // file looked up under the data directory
    std::size_t learn_size = 0;
    std::size_t test_size = 0;
    std::size_t dims = 0;
    std::string notes;
};

const std::vector<DatasetInfo>& dataset_registry();
const DatasetInfo* find_dataset(const std::string& name);
double default_learn_fraction(const DatasetInfo& info);

// Resolves a registry name, a synthetic name, or a plain CSV path. Missing
// fetched datasets raise DatasetResolutionError with fetch instructions.
Dataset resolve_dataset(const std::string& name_or_path,
                        const std::filesystem::path& data_dir);

// Human-readable fetch instructions for one registry entry.
std::string fetch_instructions(const DatasetInfo& info, const std::filesystem::path& data_dir);

struct ExperimentConfig {
    std::vector<std::string> datasets = {"synth-sine"};
    LearnerKind learner = LearnerKind::cart;
    std::size_t subsample_size = 100;  // m
    std::vector<std::size_t> fold_counts = {2, 4, 6, 8, 10, 12};
    std::vector<double> alphas = {0.6, 0.8, 1.0, 1.2, 1.4, 1.6};
    std::vector<Method> methods = {Method::vfcv, Method::penvf, Method::penvf_plus,
                                   Method::ideal};
    std::size_t realisations = 100;
    std::uint64_t seed = 0;
    std::string loss = "mae";
    double learn_fraction = 0.0;             // 0 -> registry default (0.5 for csv paths)
    std::string standardize_mode = "full";   // "full" | "train"
    std::size_t min_leaf = 1;
    std::size_t threads = 0;                 // 0 -> hardware concurrency
    GridOverrides grid;
    std::vector<std::size_t> v_sweep = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    std::filesystem::path data_dir;
    double svr_tol = 1e-3;
    std::size_t svr_max_passes = 0;
};

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);  // throws ConfigError

// One (dataset, method, V, alpha) cell aggregated over realisations.
struct CellStats {
    std::string dataset;
    Method method = Method::vfcv;
    std::size_t fold_count = 0;
    double alpha = 1.0;
    double mean_mae = 0.0;
    double sd_mae = 0.0;
    std::vector<double> errors;              // per realisation
    std::vector<std::size_t> chosen_index;   // per realisation
    double t_vs_vfcv = 0.0;
    double p_vs_vfcv = 1.0;
    bool degenerate_t = false;
    int verdict = 0;                         // +1 win / 0 draw / -1 loss vs VFCV
    std::size_t unconverged = 0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<CellStats> cells;  // dataset-major, then method, V, alpha
};

// The learn/test splits the experiment derives for one dataset of the config.
std::vector<Realisation> experiment_realisations(const ExperimentConfig& cfg,
                                                 std::size_t dataset_index,
                                                 const Dataset& raw);

// One manifest object per configured dataset, for exact reruns.
nlohmann::json experiment_manifests(const ExperimentConfig& cfg);

// The full protocol: realisations, subsampling, every (method, V, alpha)
// selection with complexity-matched retraining, test MAE, paired t-tests
// against VFCV. Bitwise deterministic given (config, seed).
ExperimentReport run_experiment(const ExperimentConfig& cfg);

void write_report_csv(const ExperimentReport& report, std::ostream& out);
void write_report_csv(const ExperimentReport& report, const std::filesystem::path& path);
nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

struct WinsRow {
    Method method;
    std::size_t fold_count;
    double alpha;
    int wins = 0, draws = 0, losses = 0;
};
// Win/draw/loss counts against VFCV per (method, V, alpha), across datasets.
std::vector<WinsRow> win_draw_loss_table(const ExperimentReport& report);
void write_wins_csv(const std::vector<WinsRow>& rows, std::ostream& out);

// Per-realisation, per-grid-point penalty comparison rows (the raw material
// for ideal-vs-approximated penalty plots). Uses the first configured dataset,
// fold count, and alpha. Rows follow grid order within each realisation.
struct TraceRow {
    std::size_t realisation = 0;
    std::size_t grid_index = 0;
    double pen_ideal = 0.0;
    double pen_vf = 0.0;
    double pen_vf_plus = 0.0;
    double beta = 1.0;
    double c_v_plus = 1.0;
    double gap_vf = 0.0;       // pen_vf - pen_ideal
    double gap_vf_plus = 0.0;  // pen_vf_plus - pen_ideal
    double full_model_loss = 0.0;
    std::vector<double> heldout, train, full;
};
std::vector<TraceRow> penalty_gap_trace(const ExperimentConfig& cfg);
void write_trace_jsonl(const std::vector<TraceRow>& rows, const HyperGrid& grid,
                       std::ostream& out);
void write_trace_csv(const std::vector<TraceRow>& rows, const HyperGrid& grid,
                     std::ostream& out);

// Named pointwise losses ("mae" only for now).
LossFn loss_from_name(const std::string& name);

}  // namespace vfpen
