#include "vfpen/model_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vfpen/errors.hpp"
#include "vfpen/rng.hpp"

namespace vfpen {

std::string to_string(LearnerKind k) { return k == LearnerKind::cart ? "cart" : "svr"; }

std::string to_string(Method m) {
    switch (m) {
        case Method::vfcv: return "vfcv";
        case Method::penvf: return "penvf";
        case Method::penvf_plus: return "penvf+";
        case Method::ideal: return "ideal";
    }
    return "?";
}

LearnerKind learner_from_string(const std::string& s) {
    if (s == "cart") return LearnerKind::cart;
    if (s == "svr") return LearnerKind::svr;
    throw ConfigError("unknown learner '" + s + "' (expected cart or svr)");
}

Method method_from_string(const std::string& s) {
    if (s == "vfcv") return Method::vfcv;
    if (s == "penvf") return Method::penvf;
    if (s == "penvf+" || s == "penvf_plus") return Method::penvf_plus;
    if (s == "ideal") return Method::ideal;
    throw ConfigError("unknown method '" + s + "'");
}

namespace {

std::vector<double> powers_of_two(int lo, int hi, int step) {
    std::vector<double> out;
    for (int e = lo; e <= hi; e += step) out.push_back(std::ldexp(1.0, e));
    return out;
}

void require_positive(const std::vector<double>& values, const char* what) {
    if (values.empty()) throw ConfigError(std::string(what) + " override must be non-empty");
    for (const double v : values)
        if (!(v > 0.0)) throw ConfigError(std::string(what) + " values must be positive");
}

}  // namespace

HyperGrid build_grid(LearnerKind kind, const GridOverrides& overrides) {
    HyperGrid grid;
    grid.kind = kind;
    if (kind == LearnerKind::svr) {
        grid.svr_cost_list = overrides.svr_cost.value_or(powers_of_two(-10, 12, 2));
        grid.svr_gamma_list = overrides.svr_gamma.value_or(powers_of_two(-10, 2, 2));
        grid.svr_epsilon_list = overrides.svr_epsilon.value_or(powers_of_two(-4, -3, 1));
        require_positive(grid.svr_cost_list, "svr cost");
        require_positive(grid.svr_gamma_list, "svr gamma");
        require_positive(grid.svr_epsilon_list, "svr epsilon");
        for (const double c : grid.svr_cost_list)
            for (const double g : grid.svr_gamma_list)
                for (const double e : grid.svr_epsilon_list)
                    grid.svr_points.push_back({c, g, e});
    } else {
        if (overrides.cart_sizes) {
            grid.cart_sizes = *overrides.cart_sizes;
            if (grid.cart_sizes.empty()) throw ConfigError("cart size override must be non-empty");
            for (const std::size_t t : grid.cart_sizes)
                if (t < 1) throw ConfigError("cart sizes must be >= 1");
        } else {
            for (int k = 2; k <= 14; ++k) {
                const double raw = std::pow(2.0, k / 2.0) - 1.0;
                grid.cart_sizes.push_back(static_cast<std::size_t>(std::llround(raw)));
            }
        }
    }
    return grid;
}

std::string HyperGrid::point_label(std::size_t i) const {
    if (kind == LearnerKind::cart) return "t=" + std::to_string(cart_sizes[i]);
    const SvrParams& p = svr_points[i];
    return "C=" + std::to_string(p.cost) + ",gamma=" + std::to_string(p.gamma) +
           ",eps=" + std::to_string(p.epsilon);
}

nlohmann::json HyperGrid::point_json(std::size_t i) const {
    if (kind == LearnerKind::cart) return nlohmann::json{{"t", cart_sizes[i]}};
    const SvrParams& p = svr_points[i];
    return nlohmann::json{{"C", p.cost}, {"gamma", p.gamma}, {"epsilon", p.epsilon}};
}

GridLearner make_grid_learner(LearnerKind kind, const HyperGrid& grid, const Dataset& ds,
                              const SelectionOptions& options) {
    if (kind == LearnerKind::cart) {
        const std::vector<std::size_t> sizes = grid.cart_sizes;
        const std::size_t min_leaf = options.min_leaf;
        return [&ds, sizes, min_leaf](std::span<const std::size_t> rows) {
            const RegressionTree grown = grow_tree(ds.features, ds.targets, rows, min_leaf);
            std::vector<RegressionTree> trees = prune_to_sizes(grown, sizes);
            std::vector<FittedModel> fits;
            fits.reserve(sizes.size());
            for (RegressionTree& tree : trees) {
                FittedModel fit;
                fit.complexity = static_cast<double>(tree.size());
                fit.predict_row = [tree = std::move(tree), &ds](std::size_t row) {
                    return tree.predict(ds.features.row(row));
                };
                fits.push_back(std::move(fit));
            }
            return fits;
        };
    }

    const std::vector<SvrParams> points = grid.svr_points;
    const double tol = options.svr_tol;
    const std::size_t max_passes = options.svr_max_passes;
    return [&ds, points, tol, max_passes](std::span<const std::size_t> rows) {
        const Matrix sub_x = ds.features.take_rows(rows);
        std::vector<double> sub_y(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) sub_y[i] = ds.targets[rows[i]];
        const Matrix d2 = squared_distances(sub_x);

        std::map<double, Matrix> grams;  // one Gram per gamma, shared across C/eps
        std::vector<FittedModel> fits;
        fits.reserve(points.size());
        for (const SvrParams& p : points) {
            auto it = grams.find(p.gamma);
            if (it == grams.end())
                it = grams.emplace(p.gamma, gram_from_distances(d2, p.gamma)).first;
            SvrModel model = fit_svr_prepared(sub_x, sub_y, it->second, p, tol, max_passes);
            FittedModel fit;
            fit.complexity = model.weight_norm;
            fit.converged = model.converged;
            fit.predict_row = [model = std::move(model), &ds](std::size_t row) {
                return predict_svr(model, ds.features.row(row));
            };
            fits.push_back(std::move(fit));
        }
        return fits;
    };
}

std::vector<double> criterion_table(Method method, const GridFoldLosses& gfl,
                                    std::size_t fold_count, double alpha) {
    const double c_v = (static_cast<double>(fold_count) - 1.0) * alpha;
    std::vector<double> crit(gfl.per_point.size(),
                             std::numeric_limits<double>::infinity());
    for (std::size_t q = 0; q < crit.size(); ++q) {
        if (!gfl.valid[q]) continue;
        if (method == Method::vfcv)
            crit[q] = vfcv_criterion(gfl.per_point[q]);
        else if (method == Method::penvf)
            crit[q] = penalised_criterion(gfl.per_point[q], c_v);
        else
            throw ConfigError("criterion_table handles vfcv/penvf only");
    }
    return crit;
}

std::vector<double> criterion_table_penvf_plus(const GridFoldLosses& gfl,
                                               std::size_t fold_count,
                                               std::span<const double> beta) {
    std::vector<double> crit(gfl.per_point.size(),
                             std::numeric_limits<double>::infinity());
    for (std::size_t q = 0; q < crit.size(); ++q) {
        if (!gfl.valid[q]) continue;
        const double c_v = cv_constant(beta[q], static_cast<double>(fold_count));
        crit[q] = penalised_criterion(gfl.per_point[q], c_v);
    }
    return crit;
}

std::vector<double> criterion_table_ideal(const std::vector<FittedModel>& full_fits,
                                          const Dataset& ds,
                                          std::span<const std::size_t> test_rows,
                                          const LossFn& loss) {
    if (test_rows.empty()) throw SizeError("ideal criterion needs a non-empty test set");
    std::vector<double> crit(full_fits.size(), std::numeric_limits<double>::infinity());
    // L_S(s(Q)) + [L_test(s(Q)) - L_S(s(Q))] collapses to the test loss.
    for (std::size_t q = 0; q < crit.size(); ++q)
        if (full_fits[q].valid) crit[q] = mean_loss(full_fits[q], ds, test_rows, loss);
    return crit;
}

std::size_t criterion_argmin(std::span<const double> criterion) {
    std::size_t best = criterion.size();
    for (std::size_t q = 0; q < criterion.size(); ++q) {
        if (!std::isfinite(criterion[q])) continue;
        if (best == criterion.size() || criterion[q] < criterion[best]) best = q;
    }
    if (best == criterion.size())
        throw SelectionError("every grid point is invalid; nothing to select");
    return best;
}

std::size_t pick_nearest(std::span<const double> values, double target) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (std::abs(values[i] - target) < std::abs(values[best] - target)) best = i;
    return best;
}

SvrMatch match_complexity_svr(double target_norm, const HyperGrid& grid,
                              std::size_t chosen_index, const Dataset& ds, const Subsample& s,
                              const SelectionOptions& options, SvrRefitCache* cache) {
    const SvrParams chosen = grid.svr_points[chosen_index];
    const std::size_t n_gamma = grid.svr_gamma_list.size();
    const std::size_t n_eps = grid.svr_epsilon_list.size();

    const auto key = std::make_pair(chosen.gamma, chosen.epsilon);
    std::vector<SvrModel> local;
    std::vector<SvrModel>* refits = nullptr;
    if (cache) {
        auto it = cache->find(key);
        if (it != cache->end()) refits = &it->second;
    }
    if (!refits) {
        const Matrix sub_x = ds.features.take_rows(s.indices);
        std::vector<double> sub_y(s.indices.size());
        for (std::size_t i = 0; i < s.indices.size(); ++i) sub_y[i] = ds.targets[s.indices[i]];
        const Matrix gram =
            gram_from_distances(squared_distances(sub_x), chosen.gamma);
        for (const double c : grid.svr_cost_list) {
            SvrParams p{c, chosen.gamma, chosen.epsilon};
            local.push_back(fit_svr_prepared(sub_x, sub_y, gram, p, options.svr_tol,
                                             options.svr_max_passes));
        }
        if (cache) {
            (*cache)[key] = std::move(local);
            refits = &(*cache)[key];
        } else {
            refits = &local;
        }
    }

    // Nearest full-fit norm among the converged refits; ties fall to the
    // smaller C because costs are scanned in ascending order.
    std::vector<double> norms;
    std::vector<std::size_t> cost_of;
    for (std::size_t ci = 0; ci < refits->size(); ++ci) {
        if (!(*refits)[ci].converged) continue;
        norms.push_back((*refits)[ci].weight_norm);
        cost_of.push_back(ci);
    }

    SvrMatch out{SvrModel{}, chosen_index, false};
    std::size_t ci = 0;
    if (norms.empty()) {
        // No refit converged: fall back to the chosen point's own refit.
        const auto pos = std::find(grid.svr_cost_list.begin(), grid.svr_cost_list.end(),
                                   chosen.cost);
        ci = static_cast<std::size_t>(pos - grid.svr_cost_list.begin());
        out.fallback = true;
    } else {
        ci = cost_of[pick_nearest(norms, target_norm)];
    }
    out.model = (*refits)[ci];
    const std::size_t gi = static_cast<std::size_t>(
        std::find(grid.svr_gamma_list.begin(), grid.svr_gamma_list.end(), chosen.gamma) -
        grid.svr_gamma_list.begin());
    const std::size_t ei = static_cast<std::size_t>(
        std::find(grid.svr_epsilon_list.begin(), grid.svr_epsilon_list.end(),
                  chosen.epsilon) -
        grid.svr_epsilon_list.begin());
    out.grid_index = ci * n_gamma * n_eps + gi * n_eps + ei;
    return out;
}

CartMatch match_complexity_cart(double mean_fold_size, const Dataset& ds, const Subsample& s,
                                const SelectionOptions& options,
                                const RegressionTree* grown) {
    // round-half-up
    const auto t_hat =
        static_cast<std::size_t>(std::max(1.0, std::floor(mean_fold_size + 0.5)));
    RegressionTree local;
    if (!grown) {
        local = grow_tree(ds.features, ds.targets, s.indices, options.min_leaf);
        grown = &local;
    }
    const std::size_t bounds[] = {t_hat};
    return CartMatch{prune_to_sizes(*grown, bounds).front(), t_hat};
}

namespace {

SelectionResult select_impl(Method method, const GridLearner& learner, std::size_t grid_size,
                            const Dataset& ds, const Subsample& s,
                            std::span<const std::size_t> test_rows,
                            const SelectionOptions& options, const HyperGrid* grid,
                            LearnerKind kind, bool match) {
    const std::vector<FittedModel> full_fits = learner(s.indices);
    if (full_fits.size() != grid_size)
        throw SelectionError("learner produced " + std::to_string(full_fits.size()) +
                             " fits for a grid of " + std::to_string(grid_size));

    SelectionResult result;
    result.method = method;

    GridFoldLosses gfl;
    bool have_gfl = false;
    if (method == Method::ideal) {
        result.criterion = criterion_table_ideal(full_fits, ds, test_rows, options.loss);
    } else if (method == Method::penvf_plus) {
        const VSweep sweep = run_v_sweep(learner, ds, s, options.v_sweep, options.seed,
                                         options.loss, &full_fits);
        const std::vector<LearningRate> rates = learning_rates(sweep, s.m());
        result.beta.reserve(rates.size());
        for (const LearningRate& lr : rates) result.beta.push_back(lr.beta);
        const auto it =
            std::find(sweep.v_values.begin(), sweep.v_values.end(), options.fold_count);
        if (it != sweep.v_values.end()) {
            gfl = sweep.per_v[static_cast<std::size_t>(it - sweep.v_values.begin())];
        } else {
            const FoldPartition partition = partition_folds(
                s, options.fold_count,
                derive_seed(options.seed, seed_stream::folds, options.fold_count));
            gfl = fold_losses_grid(learner, ds, s, partition, options.loss, &full_fits);
        }
        have_gfl = true;
        result.criterion = criterion_table_penvf_plus(gfl, options.fold_count, result.beta);
    } else {
        const FoldPartition partition = partition_folds(
            s, options.fold_count,
            derive_seed(options.seed, seed_stream::folds, options.fold_count));
        gfl = fold_losses_grid(learner, ds, s, partition, options.loss, &full_fits);
        have_gfl = true;
        result.criterion = criterion_table(method, gfl, options.fold_count, options.alpha);
    }

    result.chosen_index = criterion_argmin(result.criterion);
    result.criterion_at_chosen = result.criterion[result.chosen_index];
    result.mean_fold_complexity = have_gfl
                                      ? gfl.mean_fold_complexity[result.chosen_index]
                                      : full_fits[result.chosen_index].complexity;
    switch (method) {
        case Method::penvf:
            result.c_v = (static_cast<double>(options.fold_count) - 1.0) * options.alpha;
            break;
        case Method::penvf_plus:
            result.c_v = cv_constant(result.beta[result.chosen_index],
                                     static_cast<double>(options.fold_count));
            break;
        default:
            result.c_v = 0.0;
    }

    for (std::size_t q = 0; q < grid_size; ++q) {
        const bool ok = have_gfl ? static_cast<bool>(gfl.converged[q])
                                 : full_fits[q].converged;
        if (!ok) ++result.unconverged_points;
    }

    if (match && grid) {
        if (kind == LearnerKind::cart) {
            CartMatch cm =
                match_complexity_cart(result.mean_fold_complexity, ds, s, options, nullptr);
            result.matched_complexity = static_cast<double>(cm.size_bound);
            result.matched_index = result.chosen_index;
            RegressionTree tree = std::move(cm.tree);
            FittedModel final_model;
            final_model.complexity = static_cast<double>(tree.size());
            final_model.predict_row = [tree = std::move(tree), &ds](std::size_t row) {
                return tree.predict(ds.features.row(row));
            };
            result.final_model = std::move(final_model);
        } else {
            SvrMatch sm = match_complexity_svr(result.mean_fold_complexity, *grid,
                                               result.chosen_index, ds, s, options, nullptr);
            result.matched_complexity = result.mean_fold_complexity;
            result.matched_index = sm.grid_index;
            result.matching_fallback = sm.fallback;
            SvrModel model = std::move(sm.model);
            FittedModel final_model;
            final_model.complexity = model.weight_norm;
            final_model.converged = model.converged;
            final_model.predict_row = [model = std::move(model), &ds](std::size_t row) {
                return predict_svr(model, ds.features.row(row));
            };
            result.final_model = std::move(final_model);
        }
    } else {
        result.matched_complexity = result.mean_fold_complexity;
        result.matched_index = result.chosen_index;
        result.final_model = full_fits[result.chosen_index];
    }
    return result;
}

}  // namespace

SelectionResult select(Method method, LearnerKind kind, const HyperGrid& grid,
                       const Dataset& ds, const Subsample& s,
                       std::span<const std::size_t> test_rows,
                       const SelectionOptions& options) {
    const GridLearner learner = make_grid_learner(kind, grid, ds, options);
    return select_impl(method, learner, grid.size(), ds, s, test_rows, options, &grid, kind,
                       true);
}

SelectionResult select_with_learner(Method method, const GridLearner& learner,
                                    std::size_t grid_size, const Dataset& ds,
                                    const Subsample& s,
                                    std::span<const std::size_t> test_rows,
                                    const SelectionOptions& options) {
    return select_impl(method, learner, grid_size, ds, s, test_rows, options, nullptr,
                       LearnerKind::cart, false);
}

nlohmann::json selection_to_json(const SelectionResult& r, const HyperGrid& grid) {
    nlohmann::json j{{"method", to_string(r.method)},
                     {"chosen", grid.point_json(r.chosen_index)},
                     {"chosen_index", r.chosen_index},
                     {"matched", grid.point_json(r.matched_index)},
                     {"matched_complexity", r.matched_complexity},
                     {"mean_fold_complexity", r.mean_fold_complexity},
                     {"criterion", r.criterion},
                     {"criterion_at_chosen", r.criterion_at_chosen},
                     {"c_v", r.c_v},
                     {"test_mae", r.test_mae},
                     {"matching_fallback", r.matching_fallback},
                     {"unconverged_points", r.unconverged_points}};
    if (!r.beta.empty()) j["beta"] = r.beta;
    return j;
}

}  // namespace vfpen
