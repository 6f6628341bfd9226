#include "vfpen/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "vfpen/errors.hpp"
#include "vfpen/rng.hpp"

namespace vfpen {

LossFn loss_from_name(const std::string& name) {
    if (name == "mae") return abs_loss;
    throw ConfigError("unknown loss '" + name + "' (supported: mae)");
}

namespace {

// 17 significant digits round-trip doubles exactly; used for every CSV number
// so emitted reports are byte-identical across runs.
std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<DatasetInfo> build_registry() {
    std::vector<DatasetInfo> reg;

    const auto synth = [&reg](const std::string& name, SyntheticSpec spec,
                              std::size_t learn, std::size_t test, const std::string& notes) {
        DatasetInfo info;
        info.name = name;
        info.synthetic = true;
        info.spec = std::move(spec);
        info.learn_size = learn;
        info.test_size = test;
        info.dims = info.spec.d;
        info.notes = notes;
        reg.push_back(std::move(info));
    };
    const auto fetched = [&reg](const std::string& name, const std::string& url,
                                std::size_t learn, std::size_t test, std::size_t dims,
                                const std::string& notes) {
        DatasetInfo info;
        info.name = name;
        info.synthetic = false;
        info.source_url = url;
        info.expected_file = name + ".csv";
        info.learn_size = learn;
        info.test_size = test;
        info.dims = dims;
        info.notes = notes;
        reg.push_back(std::move(info));
    };

    synth("synth-sine", {"sine", 1200, 1, 0.3, 101}, 600, 600, "1-d sine with noise");
    synth("synth-sine-2d", {"sine", 1400, 2, 0.25, 102}, 700, 700,
          "sine on x1 plus one distractor feature");
    synth("abalone-synth", {"sine", 4177, 8, 0.7, 103}, 835, 3342,
          "offline substitute matching abalone's shape and noise level");
    synth("synth-hetero", {"hetero", 1500, 5, 0.5, 104}, 750, 750,
          "linear signal with heteroscedastic noise");
    synth("synth-hetero-10d", {"hetero", 2000, 10, 0.8, 105}, 1000, 1000,
          "wider heteroscedastic linear problem");
    synth("synth-sine-4d", {"sine", 1600, 4, 1.0, 106}, 800, 800,
          "high-noise sine with three distractor features");

    fetched("abalone", "https://archive.ics.uci.edu/dataset/1/abalone", 835, 3342, 8,
            "encode or drop the categorical sex column; target = rings");
    fetched("add10", "https://www.cs.toronto.edu/~delve/data/add10/desc.html", 2937, 6855, 10,
            "DELVE add10");
    fetched("comp-activ", "https://www.cs.toronto.edu/~delve/data/comp-activ/desc.html", 2457,
            5735, 22, "DELVE comp-activ");
    fetched("concrete", "https://archive.ics.uci.edu/dataset/165/concrete+compressive+strength",
            309, 721, 8, "target = compressive strength");
    fetched("parkinsons-motor",
            "https://archive.ics.uci.edu/dataset/189/parkinsons+telemonitoring", 2937, 2938, 20,
            "target = motor UPDRS");
    fetched("parkinsons-total",
            "https://archive.ics.uci.edu/dataset/189/parkinsons+telemonitoring", 2937, 2938, 20,
            "target = total UPDRS");
    fetched("pumadyn-32nh", "https://www.cs.toronto.edu/~delve/data/pumadyn/desc.html", 3276,
            4916, 32, "DELVE pumadyn family, 32 inputs, nonlinear, high noise");
    fetched("slice-loc",
            "https://archive.ics.uci.edu/dataset/206/relative+location+of+ct+slices+on+axial+axis",
            26750, 26750, 385, "target = relative slice location");
    fetched("winequality-red", "https://archive.ics.uci.edu/dataset/186/wine+quality", 1066, 533,
            11, "target = quality");
    fetched("winequality-white", "https://archive.ics.uci.edu/dataset/186/wine+quality", 3265,
            1633, 11, "target = quality");
    return reg;
}

}  // namespace

const std::vector<DatasetInfo>& dataset_registry() {
    static const std::vector<DatasetInfo> registry = build_registry();
    return registry;
}

const DatasetInfo* find_dataset(const std::string& name) {
    for (const DatasetInfo& info : dataset_registry())
        if (info.name == name) return &info;
    return nullptr;
}

double default_learn_fraction(const DatasetInfo& info) {
    return static_cast<double>(info.learn_size) /
           static_cast<double>(info.learn_size + info.test_size);
}

std::string fetch_instructions(const DatasetInfo& info, const std::filesystem::path& data_dir) {
    std::ostringstream out;
    out << "dataset '" << info.name << "' is not bundled (licensing).\n"
        << "  source:   " << info.source_url << "\n"
        << "  expected: " << (data_dir / info.expected_file).string() << "\n"
        << "  format:   numeric CSV, one header row, last column = target ("
        << info.dims << " features; " << info.notes << ")\n"
        << "  verify:   vfpen fetch-data " << info.name << " --data-dir "
        << data_dir.string();
    return out.str();
}

Dataset resolve_dataset(const std::string& name_or_path,
                        const std::filesystem::path& data_dir) {
    if (const DatasetInfo* info = find_dataset(name_or_path)) {
        if (info->synthetic) {
            Dataset ds = generate_synthetic(info->spec);
            ds.name = info->name;
            return ds;
        }
        const std::filesystem::path file = data_dir / info->expected_file;
        if (!std::filesystem::exists(file))
            throw DatasetResolutionError(fetch_instructions(*info, data_dir));
        Dataset ds = load_csv(file);
        ds.name = info->name;
        return ds;
    }
    if (std::filesystem::exists(name_or_path)) return load_csv(name_or_path);
    throw DatasetResolutionError(
        "unknown dataset '" + name_or_path +
        "': not a registry name and not a CSV path. Registered names: run `vfpen fetch-data` "
        "or see dataset_registry().");
}

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
    std::vector<std::string> methods;
    for (const Method m : cfg.methods) methods.push_back(to_string(m));
    j = nlohmann::json{{"datasets", cfg.datasets},
                       {"learner", to_string(cfg.learner)},
                       {"m", cfg.subsample_size},
                       {"V", cfg.fold_counts},
                       {"alpha", cfg.alphas},
                       {"methods", methods},
                       {"realisations", cfg.realisations},
                       {"seed", cfg.seed},
                       {"loss", cfg.loss},
                       {"learn_fraction", cfg.learn_fraction},
                       {"standardize", cfg.standardize_mode},
                       {"min_leaf", cfg.min_leaf},
                       {"threads", cfg.threads},
                       {"v_sweep", cfg.v_sweep},
                       {"data_dir", cfg.data_dir.string()},
                       {"svr_tol", cfg.svr_tol},
                       {"svr_max_passes", cfg.svr_max_passes}};
    nlohmann::json grid = nlohmann::json::object();
    if (cfg.grid.svr_cost) grid["svr_cost"] = *cfg.grid.svr_cost;
    if (cfg.grid.svr_gamma) grid["svr_gamma"] = *cfg.grid.svr_gamma;
    if (cfg.grid.svr_epsilon) grid["svr_epsilon"] = *cfg.grid.svr_epsilon;
    if (cfg.grid.cart_sizes) grid["cart_sizes"] = *cfg.grid.cart_sizes;
    if (!grid.empty()) j["grid"] = grid;
}

void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
    if (j.contains("datasets"))
        j.at("datasets").get_to(cfg.datasets);
    else if (j.contains("dataset")) {
        if (j.at("dataset").is_string())
            cfg.datasets = {j.at("dataset").get<std::string>()};
        else
            j.at("dataset").get_to(cfg.datasets);
    }
    if (j.contains("learner")) cfg.learner = learner_from_string(j.at("learner"));
    cfg.subsample_size = j.value("m", cfg.subsample_size);
    if (j.contains("V")) j.at("V").get_to(cfg.fold_counts);
    if (j.contains("alpha")) j.at("alpha").get_to(cfg.alphas);
    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto& name : j.at("methods"))
            cfg.methods.push_back(method_from_string(name.get<std::string>()));
    }
    cfg.realisations = j.value("realisations", cfg.realisations);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.loss = j.value("loss", cfg.loss);
    cfg.learn_fraction = j.value("learn_fraction", cfg.learn_fraction);
    cfg.standardize_mode = j.value("standardize", cfg.standardize_mode);
    cfg.min_leaf = j.value("min_leaf", cfg.min_leaf);
    cfg.threads = j.value("threads", cfg.threads);
    if (j.contains("v_sweep")) j.at("v_sweep").get_to(cfg.v_sweep);
    if (j.contains("data_dir")) cfg.data_dir = j.at("data_dir").get<std::string>();
    cfg.svr_tol = j.value("svr_tol", cfg.svr_tol);
    cfg.svr_max_passes = j.value("svr_max_passes", cfg.svr_max_passes);
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (g.contains("svr_cost"))
            cfg.grid.svr_cost = g.at("svr_cost").get<std::vector<double>>();
        if (g.contains("svr_gamma"))
            cfg.grid.svr_gamma = g.at("svr_gamma").get<std::vector<double>>();
        if (g.contains("svr_epsilon"))
            cfg.grid.svr_epsilon = g.at("svr_epsilon").get<std::vector<double>>();
        if (g.contains("cart_sizes"))
            cfg.grid.cart_sizes = g.at("cart_sizes").get<std::vector<std::size_t>>();
    }
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.datasets.empty()) throw ConfigError("config needs at least one dataset");
    if (cfg.fold_counts.empty()) throw ConfigError("config needs at least one fold count");
    if (cfg.alphas.empty()) throw ConfigError("config needs at least one alpha");
    if (cfg.methods.empty()) throw ConfigError("config needs at least one method");
    if (cfg.realisations < 1) throw ConfigError("realisations must be >= 1");
    if (cfg.subsample_size < 2) throw ConfigError("m must be >= 2");
    for (const std::size_t v : cfg.fold_counts) {
        if (v < 2) throw ConfigError("fold counts must be >= 2");
        if (v > cfg.subsample_size)
            throw ConfigError("fold count " + std::to_string(v) + " exceeds m = " +
                              std::to_string(cfg.subsample_size));
    }
    for (const double a : cfg.alphas)
        if (!(a > 0.0)) throw ConfigError("alpha values must be positive");
    if (cfg.v_sweep.size() < 2) throw ConfigError("v_sweep needs at least two fold counts");
    for (const std::size_t v : cfg.v_sweep)
        if (v < 2 || v > cfg.subsample_size)
            throw ConfigError("v_sweep entries must lie in [2, m]");
    if (cfg.standardize_mode != "full" && cfg.standardize_mode != "train")
        throw ConfigError("standardize must be 'full' or 'train'");
    loss_from_name(cfg.loss);
    if (cfg.learn_fraction < 0.0 || cfg.learn_fraction >= 1.0)
        throw ConfigError("learn_fraction must lie in [0, 1) (0 = registry default)");
}

namespace {

struct Outcome {
    double mae = 0.0;
    std::size_t chosen = 0;
    std::size_t unconverged = 0;
};

struct CellKey {
    Method method;
    std::size_t fold_count;
    double alpha;
};

// Everything one realisation contributes, aligned with the cell list.
using RealisationRow = std::vector<Outcome>;

std::size_t count_unconverged(const GridFoldLosses* gfl,
                              const std::vector<FittedModel>& full_fits) {
    std::size_t bad = 0;
    if (gfl) {
        for (const char ok : gfl->converged)
            if (!ok) ++bad;
    } else {
        for (const FittedModel& fit : full_fits)
            if (!fit.converged) ++bad;
    }
    return bad;
}

}  // namespace

std::vector<Realisation> experiment_realisations(const ExperimentConfig& cfg,
                                                 std::size_t dataset_index,
                                                 const Dataset& raw) {
    const DatasetInfo* info = find_dataset(cfg.datasets[dataset_index]);
    const double fraction = cfg.learn_fraction > 0.0
                                ? cfg.learn_fraction
                                : (info ? default_learn_fraction(*info) : 0.5);
    const std::uint64_t dataset_seed =
        derive_seed(cfg.seed, seed_stream::dataset, dataset_index);
    return make_realisations(raw, cfg.realisations, fraction, dataset_seed);
}

nlohmann::json experiment_manifests(const ExperimentConfig& cfg) {
    validate(cfg);
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t di = 0; di < cfg.datasets.size(); ++di) {
        const Dataset raw = resolve_dataset(cfg.datasets[di], cfg.data_dir);
        out.push_back(realisation_manifest(cfg.datasets[di],
                                           experiment_realisations(cfg, di, raw)));
    }
    return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const LossFn loss = loss_from_name(cfg.loss);
    const HyperGrid grid = build_grid(cfg.learner, cfg.grid);
    const bool has_vfcv =
        std::find(cfg.methods.begin(), cfg.methods.end(), Method::vfcv) != cfg.methods.end();

    ExperimentReport report;
    report.config = cfg;

    std::vector<CellKey> cell_keys;
    for (const Method method : cfg.methods)
        for (const std::size_t v : cfg.fold_counts)
            for (const double alpha : cfg.alphas) cell_keys.push_back({method, v, alpha});
    const auto cell_index = [&](std::size_t mi, std::size_t vi, std::size_t ai) {
        return (mi * cfg.fold_counts.size() + vi) * cfg.alphas.size() + ai;
    };

    for (std::size_t di = 0; di < cfg.datasets.size(); ++di) {
        const std::string& name = cfg.datasets[di];
        const Dataset raw = resolve_dataset(name, cfg.data_dir);
        const std::uint64_t dataset_seed = derive_seed(cfg.seed, seed_stream::dataset, di);
        const std::vector<Realisation> realisations = experiment_realisations(cfg, di, raw);
        std::optional<Dataset> shared_std;
        if (cfg.standardize_mode == "full") shared_std = standardize(raw);

        const std::size_t R = cfg.realisations;
        std::vector<RealisationRow> rows(R);

        const auto process_realisation = [&](std::size_t r) {
            std::optional<Dataset> local_std;
            if (!shared_std)
                local_std = standardize_with(raw, realisations[r].train_indices);
            const Dataset& work = shared_std ? *shared_std : *local_std;

            const Subsample sub = make_subsample(
                realisations[r], cfg.subsample_size,
                derive_seed(dataset_seed, seed_stream::subsample, r));
            const std::span<const std::size_t> test_rows = realisations[r].test_indices;

            SelectionOptions options;
            options.alpha = 1.0;
            options.v_sweep = cfg.v_sweep;
            options.seed = derive_seed(dataset_seed, seed_stream::selection, r);
            options.min_leaf = cfg.min_leaf;
            options.svr_tol = cfg.svr_tol;
            options.svr_max_passes = cfg.svr_max_passes;
            options.loss = loss;

            const GridLearner learner = make_grid_learner(cfg.learner, grid, work, options);
            const std::vector<FittedModel> full_fits = learner(sub.indices);

            std::optional<RegressionTree> full_tree;
            if (cfg.learner == LearnerKind::cart)
                full_tree = grow_tree(work.features, work.targets, sub.indices, cfg.min_leaf);
            SvrRefitCache svr_cache;

            const auto finish = [&](std::span<const double> crit,
                                    const GridFoldLosses* gfl) {
                Outcome out;
                out.chosen = criterion_argmin(crit);
                const double history = gfl ? gfl->mean_fold_complexity[out.chosen]
                                           : full_fits[out.chosen].complexity;
                FittedModel final_model;
                if (cfg.learner == LearnerKind::cart) {
                    CartMatch cm = match_complexity_cart(history, work, sub, options,
                                                         &*full_tree);
                    RegressionTree tree = std::move(cm.tree);
                    final_model.complexity = static_cast<double>(tree.size());
                    final_model.predict_row = [tree = std::move(tree),
                                               &work](std::size_t row) {
                        return tree.predict(work.features.row(row));
                    };
                } else {
                    SvrMatch sm = match_complexity_svr(history, grid, out.chosen, work, sub,
                                                       options, &svr_cache);
                    SvrModel model = std::move(sm.model);
                    final_model.converged = model.converged;
                    final_model.predict_row = [model = std::move(model),
                                               &work](std::size_t row) {
                        return predict_svr(model, work.features.row(row));
                    };
                }
                out.mae = mean_loss(final_model, work, test_rows, loss);
                out.unconverged = count_unconverged(gfl, full_fits);
                return out;
            };

            RealisationRow& row = rows[r];
            row.resize(cell_keys.size());

            // Ideal is V- and alpha-invariant: one selection, replicated.
            std::optional<Outcome> ideal_outcome;
            if (std::find(cfg.methods.begin(), cfg.methods.end(), Method::ideal) !=
                cfg.methods.end()) {
                const std::vector<double> crit =
                    criterion_table_ideal(full_fits, work, test_rows, loss);
                ideal_outcome = finish(crit, nullptr);
            }

            // PenVF+ sweep: one set of fold fits per sweep V, shared across the
            // experiment's fold counts when they coincide.
            std::optional<VSweep> sweep;
            std::vector<double> betas;
            if (std::find(cfg.methods.begin(), cfg.methods.end(), Method::penvf_plus) !=
                cfg.methods.end()) {
                sweep = run_v_sweep(learner, work, sub, cfg.v_sweep, options.seed, loss,
                                    &full_fits);
                for (const LearningRate& lr : learning_rates(*sweep, sub.m()))
                    betas.push_back(lr.beta);
            }

            for (std::size_t vi = 0; vi < cfg.fold_counts.size(); ++vi) {
                const std::size_t v = cfg.fold_counts[vi];
                std::optional<GridFoldLosses> gfl_local;
                const GridFoldLosses* gfl = nullptr;
                const bool needs_folds =
                    std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method m) {
                        return m == Method::vfcv || m == Method::penvf ||
                               m == Method::penvf_plus;
                    });
                if (needs_folds) {
                    if (sweep) {
                        const auto it = std::find(sweep->v_values.begin(),
                                                  sweep->v_values.end(), v);
                        if (it != sweep->v_values.end())
                            gfl = &sweep->per_v[static_cast<std::size_t>(
                                it - sweep->v_values.begin())];
                    }
                    if (!gfl) {
                        const FoldPartition partition = partition_folds(
                            sub, v, derive_seed(options.seed, seed_stream::folds, v));
                        gfl_local =
                            fold_losses_grid(learner, work, sub, partition, loss, &full_fits);
                        gfl = &*gfl_local;
                    }
                }

                for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
                    const Method method = cfg.methods[mi];
                    if (method == Method::ideal) {
                        for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai)
                            row[cell_index(mi, vi, ai)] = *ideal_outcome;
                        continue;
                    }
                    if (method == Method::penvf) {
                        for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai) {
                            const std::vector<double> crit =
                                criterion_table(method, *gfl, v, cfg.alphas[ai]);
                            row[cell_index(mi, vi, ai)] = finish(crit, gfl);
                        }
                        continue;
                    }
                    // vfcv / penvf+ ignore alpha: compute once, replicate.
                    const std::vector<double> crit =
                        method == Method::vfcv
                            ? criterion_table(method, *gfl, v, 1.0)
                            : criterion_table_penvf_plus(*gfl, v, betas);
                    const Outcome out = finish(crit, gfl);
                    for (std::size_t ai = 0; ai < cfg.alphas.size(); ++ai)
                        row[cell_index(mi, vi, ai)] = out;
                }
            }
        };

        const std::size_t hw = std::thread::hardware_concurrency();
        std::size_t workers = cfg.threads ? cfg.threads : (hw ? hw : 1);
        workers = std::min(workers, R);
        if (workers <= 1) {
            for (std::size_t r = 0; r < R; ++r) process_realisation(r);
        } else {
            std::atomic<std::size_t> next{0};
            std::exception_ptr first_error;
            std::mutex error_mutex;
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back([&] {
                    for (;;) {
                        const std::size_t r = next.fetch_add(1);
                        if (r >= R) return;
                        try {
                            process_realisation(r);
                        } catch (...) {
                            std::lock_guard<std::mutex> lock(error_mutex);
                            if (!first_error) first_error = std::current_exception();
                            return;
                        }
                    }
                });
            for (std::thread& t : pool) t.join();
            if (first_error) std::rethrow_exception(first_error);
        }

        // Reduce in fixed cell order; results are independent of scheduling.
        std::vector<CellStats> dataset_cells(cell_keys.size());
        for (std::size_t c = 0; c < cell_keys.size(); ++c) {
            CellStats& cell = dataset_cells[c];
            cell.dataset = name;
            cell.method = cell_keys[c].method;
            cell.fold_count = cell_keys[c].fold_count;
            cell.alpha = cell_keys[c].alpha;
            cell.errors.reserve(R);
            cell.chosen_index.reserve(R);
            for (std::size_t r = 0; r < R; ++r) {
                cell.errors.push_back(rows[r][c].mae);
                cell.chosen_index.push_back(rows[r][c].chosen);
                cell.unconverged += rows[r][c].unconverged;
            }
            cell.mean_mae = mean(cell.errors);
            cell.sd_mae = sample_sd(cell.errors);
        }

        // Paired t-tests against the VFCV cell with the same (V, alpha).
        for (std::size_t c = 0; c < cell_keys.size(); ++c) {
            CellStats& cell = dataset_cells[c];
            if (!has_vfcv || cell.method == Method::vfcv || R < 2) {
                cell.t_vs_vfcv = 0.0;
                cell.p_vs_vfcv = 1.0;
                cell.verdict = 0;
                continue;
            }
            const std::size_t mi_vfcv = static_cast<std::size_t>(
                std::find(cfg.methods.begin(), cfg.methods.end(), Method::vfcv) -
                cfg.methods.begin());
            const std::size_t vi = static_cast<std::size_t>(
                std::find(cfg.fold_counts.begin(), cfg.fold_counts.end(), cell.fold_count) -
                cfg.fold_counts.begin());
            const std::size_t ai = static_cast<std::size_t>(
                std::find_if(cfg.alphas.begin(), cfg.alphas.end(),
                             [&](double a) { return a == cell.alpha; }) -
                cfg.alphas.begin());
            const CellStats& baseline = dataset_cells[cell_index(mi_vfcv, vi, ai)];
            const TTest tt = paired_t_test(cell.errors, baseline.errors);
            cell.t_vs_vfcv = tt.t;
            cell.p_vs_vfcv = tt.p;
            cell.degenerate_t = tt.degenerate;
            if (tt.p >= 0.1)
                cell.verdict = 0;
            else
                cell.verdict = cell.mean_mae < baseline.mean_mae ? 1 : -1;
        }

        for (CellStats& cell : dataset_cells) report.cells.push_back(std::move(cell));
    }
    return report;
}

namespace {

const char* verdict_name(int v) { return v > 0 ? "win" : (v < 0 ? "loss" : "draw"); }

}  // namespace

void write_report_csv(const ExperimentReport& report, std::ostream& out) {
    out << "dataset,learner,method,V,alpha,m,realisations,mean_mae,sd_mae,t_vs_vfcv,"
           "p_vs_vfcv,verdict,unconverged\n";
    for (const CellStats& cell : report.cells) {
        out << cell.dataset << ',' << to_string(report.config.learner) << ','
            << to_string(cell.method) << ',' << cell.fold_count << ',' << fmt17(cell.alpha)
            << ',' << report.config.subsample_size << ',' << report.config.realisations << ','
            << fmt17(cell.mean_mae) << ',' << fmt17(cell.sd_mae) << ','
            << fmt17(cell.t_vs_vfcv) << ',' << fmt17(cell.p_vs_vfcv) << ','
            << verdict_name(cell.verdict) << ',' << cell.unconverged << '\n';
    }
}

void write_report_csv(const ExperimentReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    write_report_csv(report, out);
    if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

nlohmann::json report_to_json(const ExperimentReport& report) {
    nlohmann::json cells = nlohmann::json::array();
    for (const CellStats& cell : report.cells) {
        cells.push_back(nlohmann::json{{"dataset", cell.dataset},
                                       {"method", to_string(cell.method)},
                                       {"V", cell.fold_count},
                                       {"alpha", cell.alpha},
                                       {"mean_mae", cell.mean_mae},
                                       {"sd_mae", cell.sd_mae},
                                       {"errors", cell.errors},
                                       {"chosen_index", cell.chosen_index},
                                       {"t_vs_vfcv", fmt17(cell.t_vs_vfcv)},
                                       {"p_vs_vfcv", cell.p_vs_vfcv},
                                       {"degenerate_t", cell.degenerate_t},
                                       {"verdict", cell.verdict},
                                       {"unconverged", cell.unconverged}});
    }
    nlohmann::json j;
    to_json(j["config"], report.config);
    j["cells"] = std::move(cells);
    return j;
}

ExperimentReport report_from_json(const nlohmann::json& j) {
    ExperimentReport report;
    from_json(j.at("config"), report.config);
    for (const auto& c : j.at("cells")) {
        CellStats cell;
        cell.dataset = c.at("dataset").get<std::string>();
        cell.method = method_from_string(c.at("method").get<std::string>());
        cell.fold_count = c.at("V").get<std::size_t>();
        cell.alpha = c.at("alpha").get<double>();
        cell.mean_mae = c.at("mean_mae").get<double>();
        cell.sd_mae = c.at("sd_mae").get<double>();
        c.at("errors").get_to(cell.errors);
        c.at("chosen_index").get_to(cell.chosen_index);
        cell.t_vs_vfcv = std::strtod(c.at("t_vs_vfcv").get<std::string>().c_str(), nullptr);
        cell.p_vs_vfcv = c.at("p_vs_vfcv").get<double>();
        cell.degenerate_t = c.at("degenerate_t").get<bool>();
        cell.verdict = c.at("verdict").get<int>();
        cell.unconverged = c.at("unconverged").get<std::size_t>();
        report.cells.push_back(std::move(cell));
    }
    return report;
}

std::vector<WinsRow> win_draw_loss_table(const ExperimentReport& report) {
    std::vector<WinsRow> rows;
    const auto find_row = [&rows](Method method, std::size_t v, double alpha) -> WinsRow& {
        for (WinsRow& row : rows)
            if (row.method == method && row.fold_count == v && row.alpha == alpha) return row;
        rows.push_back(WinsRow{method, v, alpha, 0, 0, 0});
        return rows.back();
    };
    for (const CellStats& cell : report.cells) {
        WinsRow& row = find_row(cell.method, cell.fold_count, cell.alpha);
        if (cell.verdict > 0)
            ++row.wins;
        else if (cell.verdict < 0)
            ++row.losses;
        else
            ++row.draws;
    }
    return rows;
}

void write_wins_csv(const std::vector<WinsRow>& rows, std::ostream& out) {
    out << "method,V,alpha,wins,draws,losses\n";
    for (const WinsRow& row : rows)
        out << to_string(row.method) << ',' << row.fold_count << ',' << fmt17(row.alpha) << ','
            << row.wins << ',' << row.draws << ',' << row.losses << '\n';
}

std::vector<TraceRow> penalty_gap_trace(const ExperimentConfig& cfg) {
    validate(cfg);
    const LossFn loss = loss_from_name(cfg.loss);
    const HyperGrid grid = build_grid(cfg.learner, cfg.grid);
    const std::string& name = cfg.datasets.front();
    const std::size_t v = cfg.fold_counts.front();
    const double alpha = cfg.alphas.front();

    const Dataset raw = resolve_dataset(name, cfg.data_dir);
    const std::uint64_t dataset_seed = derive_seed(cfg.seed, seed_stream::dataset, 0);
    const std::vector<Realisation> realisations = experiment_realisations(cfg, 0, raw);
    std::optional<Dataset> shared_std;
    if (cfg.standardize_mode == "full") shared_std = standardize(raw);

    std::vector<TraceRow> out;
    for (std::size_t r = 0; r < cfg.realisations; ++r) {
        std::optional<Dataset> local_std;
        if (!shared_std) local_std = standardize_with(raw, realisations[r].train_indices);
        const Dataset& work = shared_std ? *shared_std : *local_std;

        const Subsample sub =
            make_subsample(realisations[r], cfg.subsample_size,
                           derive_seed(dataset_seed, seed_stream::subsample, r));
        SelectionOptions options;
        options.seed = derive_seed(dataset_seed, seed_stream::selection, r);
        options.min_leaf = cfg.min_leaf;
        options.svr_tol = cfg.svr_tol;
        options.svr_max_passes = cfg.svr_max_passes;
        options.loss = loss;

        const GridLearner learner = make_grid_learner(cfg.learner, grid, work, options);
        const std::vector<FittedModel> full_fits = learner(sub.indices);
        const VSweep sweep =
            run_v_sweep(learner, work, sub, cfg.v_sweep, options.seed, loss, &full_fits);
        const std::vector<LearningRate> rates = learning_rates(sweep, sub.m());

        const GridFoldLosses* gfl = nullptr;
        std::optional<GridFoldLosses> gfl_local;
        const auto it = std::find(sweep.v_values.begin(), sweep.v_values.end(), v);
        if (it != sweep.v_values.end()) {
            gfl = &sweep.per_v[static_cast<std::size_t>(it - sweep.v_values.begin())];
        } else {
            const FoldPartition partition =
                partition_folds(sub, v, derive_seed(options.seed, seed_stream::folds, v));
            gfl_local = fold_losses_grid(learner, work, sub, partition, loss, &full_fits);
            gfl = &*gfl_local;
        }

        for (std::size_t q = 0; q < grid.size(); ++q) {
            if (!gfl->valid[q]) continue;
            TraceRow row;
            row.realisation = r;
            row.grid_index = q;
            const FoldLosses& fl = gfl->per_point[q];
            row.pen_vf = pen_vf(fl, (static_cast<double>(v) - 1.0) * alpha);
            row.beta = rates[q].beta;
            row.c_v_plus = cv_constant(row.beta, static_cast<double>(v));
            row.pen_vf_plus = pen_vf(fl, row.c_v_plus);
            const double test_loss =
                mean_loss(full_fits[q], work, realisations[r].test_indices, loss);
            row.pen_ideal = test_loss - fl.full_model_loss;
            row.gap_vf = row.pen_vf - row.pen_ideal;
            row.gap_vf_plus = row.pen_vf_plus - row.pen_ideal;
            row.full_model_loss = fl.full_model_loss;
            row.heldout = fl.heldout_loss;
            row.train = fl.train_loss;
            row.full = fl.full_loss;
            out.push_back(std::move(row));
        }
    }
    return out;
}

void write_trace_jsonl(const std::vector<TraceRow>& rows, const HyperGrid& grid,
                       std::ostream& out) {
    for (const TraceRow& row : rows) {
        nlohmann::json j{{"realisation", row.realisation},
                         {"grid_index", row.grid_index},
                         {"q", grid.point_json(row.grid_index)},
                         {"pen_ideal", row.pen_ideal},
                         {"pen_vf", row.pen_vf},
                         {"pen_vf_plus", row.pen_vf_plus},
                         {"beta", row.beta},
                         {"c_v_plus", row.c_v_plus},
                         {"gap_vf", row.gap_vf},
                         {"gap_vf_plus", row.gap_vf_plus},
                         {"full_model_loss", row.full_model_loss},
                         {"fold_heldout", row.heldout},
                         {"fold_train", row.train},
                         {"fold_full", row.full}};
        out << j.dump() << '\n';
    }
}

void write_trace_csv(const std::vector<TraceRow>& rows, const HyperGrid& grid,
                     std::ostream& out) {
    out << "realisation,grid_index,label,pen_ideal,pen_vf,pen_vf_plus,beta,c_v_plus,gap_vf,"
           "gap_vf_plus,full_model_loss\n";
    for (const TraceRow& row : rows) {
        out << row.realisation << ',' << row.grid_index << ','
            << grid.point_label(row.grid_index) << ',' << fmt17(row.pen_ideal) << ','
            << fmt17(row.pen_vf) << ',' << fmt17(row.pen_vf_plus) << ',' << fmt17(row.beta)
            << ',' << fmt17(row.c_v_plus) << ',' << fmt17(row.gap_vf) << ','
            << fmt17(row.gap_vf_plus) << ',' << fmt17(row.full_model_loss) << '\n';
    }
}

}  // namespace vfpen
