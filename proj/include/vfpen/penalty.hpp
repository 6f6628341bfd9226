#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "vfpen/dataset.hpp"

namespace vfpen {

// Pointwise loss; the criteria average it over rows. Everywhere the protocol
// evaluates predictors it uses the absolute deviation; CART's internal split
// criterion stays squared error. The two roles are deliberately distinct.
using LossFn = std::function<double(double prediction, double target)>;
double abs_loss(double prediction, double target);

// A fitted model over dataset rows. Predictors capture references into the
// dataset they were fitted from; keep the dataset alive while models are used.
struct FittedModel {
    std::function<double(std::size_t row)> predict_row;
    double complexity = 0.0;  // tree node count or SVR weight norm
    bool converged = true;
    bool valid = true;        // false marks a failed grid point
};

// Fit at one hyperparameter point on the given training rows.
using Learner = std::function<FittedModel(std::span<const std::size_t> rows)>;
// Fit every grid point on the given training rows.
using GridLearner = std::function<std::vector<FittedModel>(std::span<const std::size_t> rows)>;

// Mean pointwise loss of a fitted model over the given dataset rows.
double mean_loss(const FittedModel& model, const Dataset& ds,
                 std::span<const std::size_t> rows, const LossFn& loss = abs_loss);

// Per-fold losses for one hyperparameter point. With B_j the j-th block and
// s^(-j) the model fitted on S minus B_j:
//   heldout_loss[j] = L_S^(j)(s^(-j))    mean loss on B_j
//   train_loss[j]   = L_S^(-j)(s^(-j))   mean loss on S minus B_j
//   full_loss[j]    = L_S(s^(-j))        mean loss on all of S
// full_model_loss is L_S(s(Q)) for the model fitted on all of S.
struct FoldLosses {
    std::size_t fold_count = 0;
    std::vector<double> heldout_loss;
    std::vector<double> train_loss;
    std::vector<double> full_loss;
    std::vector<std::size_t> fold_sizes;
    std::size_t sample_count = 0;
    double full_model_loss = 0.0;
};

// Learner exceptions are rethrown with the failing fold index attached.
FoldLosses fold_losses(const Learner& learner, const Dataset& ds, const Subsample& s,
                       const FoldPartition& partition, const LossFn& loss = abs_loss);

struct GridFoldLosses {
    std::vector<FoldLosses> per_point;
    std::vector<double> mean_fold_complexity;  // mean over the V fold fits
    std::vector<char> valid;
    std::vector<char> converged;
};

// Shared-fit variant: one grid fit per fold plus one on the full subsample
// (or the caller's precomputed full_fits).
GridFoldLosses fold_losses_grid(const GridLearner& learner, const Dataset& ds,
                                const Subsample& s, const FoldPartition& partition,
                                const LossFn& loss = abs_loss,
                                const std::vector<FittedModel>* full_fits = nullptr);

// (1/V) sum_j heldout_loss[j]
double vfcv_criterion(const FoldLosses& fl);

// (C_V/V) sum_j [full_loss[j] - train_loss[j]]; may be negative, never floored.
double pen_vf(const FoldLosses& fl, double c_v);

// full_model_loss + pen_vf(fl, c_v)
double penalised_criterion(const FoldLosses& fl, double c_v);

// (V-1)^beta * V^(1-beta); exact at beta = 0 (gives V) and beta = 1 (gives V-1).
double cv_constant(double beta, double fold_count);

struct LearningRate {
    double beta = 1.0;       // clipped to [0, 1]
    double intercept = 0.0;  // log D(Q)
    std::vector<std::pair<double, double>> points;  // (log(n(V-1)/V), log(pen/C_V)+log V)
    std::size_t valid_point_count = 0;
    bool fallback = false;   // fewer than two positive-penalty points
};

// pen_by_v holds (V, pen_VF at the reference constant C_V = V-1). Points with
// non-positive penalty are dropped before the log-log regression; the fitted
// model is y = -beta * x + log D(Q), so beta is the negated slope.
LearningRate fit_learning_rate(std::span<const std::pair<std::size_t, double>> pen_by_v,
                               std::size_t sample_count);

// Runs the V sweep on one subsample; fold seeds derive from (seed, V) so the
// regression varies only the analytic quantities. Invariant to V-set order.
LearningRate estimate_beta(const Learner& learner, const Dataset& ds, const Subsample& s,
                           std::span<const std::size_t> v_set, std::uint64_t seed,
                           const LossFn& loss = abs_loss);

// Grid variant keeping every per-V fold-loss table for reuse.
struct VSweep {
    std::vector<std::size_t> v_values;  // sorted, deduplicated
    std::vector<GridFoldLosses> per_v;
};
VSweep run_v_sweep(const GridLearner& learner, const Dataset& ds, const Subsample& s,
                   std::span<const std::size_t> v_set, std::uint64_t seed,
                   const LossFn& loss = abs_loss,
                   const std::vector<FittedModel>* full_fits = nullptr);
std::vector<LearningRate> learning_rates(const VSweep& sweep, std::size_t sample_count);

struct IdealPenalty {
    double value = 0.0;  // L_test(s(Q)) - L_S(s(Q))
    double gap = 0.0;    // pen_vf_value - value
};
IdealPenalty ideal_penalty(const Learner& learner, const Dataset& ds, const Subsample& s,
                           std::span<const std::size_t> test_rows, const LossFn& loss,
                           double pen_vf_value);

}  // namespace vfpen
