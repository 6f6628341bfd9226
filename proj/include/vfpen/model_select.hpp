#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vfpen/cart.hpp"
#include "vfpen/penalty.hpp"
#include "vfpen/svr.hpp"

namespace vfpen {

enum class LearnerKind { cart, svr };
enum class Method { vfcv, penvf, penvf_plus, ideal };

std::string to_string(LearnerKind k);
std::string to_string(Method m);
LearnerKind learner_from_string(const std::string& s);
Method method_from_string(const std::string& s);

struct GridOverrides {
    std::optional<std::vector<double>> svr_cost;
    std::optional<std::vector<double>> svr_gamma;
    std::optional<std::vector<double>> svr_epsilon;
    std::optional<std::vector<std::size_t>> cart_sizes;
};

// SVR points are ordered lexicographically over (cost, gamma, epsilon) lists;
// CART points are tree-size bounds.
struct HyperGrid {
    LearnerKind kind = LearnerKind::cart;
    std::vector<SvrParams> svr_points;
    std::vector<std::size_t> cart_sizes;
    std::vector<double> svr_cost_list, svr_gamma_list, svr_epsilon_list;

    std::size_t size() const {
        return kind == LearnerKind::svr ? svr_points.size() : cart_sizes.size();
    }
    std::string point_label(std::size_t i) const;
    nlohmann::json point_json(std::size_t i) const;
};

// Defaults: SVR C in 2^{-10,-8,..,12}, gamma in 2^{-10,..,2}, eps in {2^-4, 2^-3}
// (168 points); CART t in {round(2^(k/2) - 1) : k = 2..14} (13 sizes).
HyperGrid build_grid(LearnerKind kind, const GridOverrides& overrides = {});

struct SelectionOptions {
    std::size_t fold_count = 2;  // V
    double alpha = 1.0;          // PenVF multiplier: C_V = (V-1) * alpha
    std::vector<std::size_t> v_sweep = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};  // PenVF+
    std::uint64_t seed = 0;
    std::size_t min_leaf = 1;
    double svr_tol = 1e-3;
    std::size_t svr_max_passes = 0;
    LossFn loss = abs_loss;
};

struct SelectionResult {
    Method method = Method::vfcv;
    std::size_t chosen_index = 0;       // argmin of the criterion, grid order on ties
    std::size_t matched_index = 0;      // grid point of the final model after matching
    double matched_complexity = 0.0;    // t_hat for CART, target ||w*|| for SVR
    double mean_fold_complexity = 0.0;  // raw complexity history at the chosen point
    double criterion_at_chosen = 0.0;
    std::vector<double> criterion;      // +inf marks invalid points
    std::vector<double> beta;           // per-point learning rates (PenVF+ only)
    double c_v = 0.0;                   // penalisation constant at the chosen point
    FittedModel final_model;            // trained on the full subsample
    double test_mae = 0.0;              // filled by the harness
    bool matching_fallback = false;
    std::size_t unconverged_points = 0;
};

GridLearner make_grid_learner(LearnerKind kind, const HyperGrid& grid, const Dataset& ds,
                              const SelectionOptions& options);

// End-to-end selection: criterion over the grid, argmin, complexity-matched
// retraining on the full subsample. test_rows are only consulted by Ideal.
SelectionResult select(Method method, LearnerKind kind, const HyperGrid& grid,
                       const Dataset& ds, const Subsample& s,
                       std::span<const std::size_t> test_rows, const SelectionOptions& options);

// Same selection logic with a caller-supplied learner (used by tests to inject
// failing grid points). No complexity matching: the final model is the
// full-subsample fit at the chosen point.
SelectionResult select_with_learner(Method method, const GridLearner& learner,
                                    std::size_t grid_size, const Dataset& ds, const Subsample& s,
                                    std::span<const std::size_t> test_rows,
                                    const SelectionOptions& options);

// Criterion assembly from precomputed fold losses (shared by select and the
// benchmark harness).
std::vector<double> criterion_table(Method method, const GridFoldLosses& gfl,
                                    std::size_t fold_count, double alpha);
std::vector<double> criterion_table_penvf_plus(const GridFoldLosses& gfl, std::size_t fold_count,
                                               std::span<const double> beta);
std::vector<double> criterion_table_ideal(const std::vector<FittedModel>& full_fits,
                                          const Dataset& ds,
                                          std::span<const std::size_t> test_rows,
                                          const LossFn& loss);

// First index minimising the table; throws SelectionError when all +inf.
std::size_t criterion_argmin(std::span<const double> criterion);

// First index of the value nearest to target; ties take the lower index.
std::size_t pick_nearest(std::span<const double> values, double target);

// Refit caches reused across selections on the same subsample.
using SvrRefitCache = std::map<std::pair<double, double>, std::vector<SvrModel>>;

struct SvrMatch {
    SvrModel model;
    std::size_t grid_index;
    bool fallback;
};
// Records ||w*|| (mean fold norm at the chosen point), refits on the whole
// subsample for every C at the chosen (gamma, epsilon) and keeps the refit
// whose norm is closest (ties: smaller C). If no refit converges, falls back
// to a direct refit at the chosen point, flagged.
SvrMatch match_complexity_svr(double target_norm, const HyperGrid& grid,
                              std::size_t chosen_index, const Dataset& ds, const Subsample& s,
                              const SelectionOptions& options, SvrRefitCache* cache = nullptr);

struct CartMatch {
    RegressionTree tree;
    std::size_t size_bound;  // t_hat, round-half-up of the mean fold tree size
};
// grown, when given, is the already-grown full-subsample tree.
CartMatch match_complexity_cart(double mean_fold_size, const Dataset& ds, const Subsample& s,
                                const SelectionOptions& options,
                                const RegressionTree* grown = nullptr);

nlohmann::json selection_to_json(const SelectionResult& r, const HyperGrid& grid);

}  // namespace vfpen
