#include "vfpen/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "vfpen/errors.hpp"
#include "vfpen/rng.hpp"

namespace vfpen {

double abs_loss(double prediction, double target) { return std::abs(prediction - target); }

double mean_loss(const FittedModel& model, const Dataset& ds,
                 std::span<const std::size_t> rows, const LossFn& loss) {
    double acc = 0.0;
    for (const std::size_t r : rows) acc += loss(model.predict_row(r), ds.targets[r]);
    return acc / static_cast<double>(rows.size());
}

namespace {

std::vector<std::size_t> rows_minus_block(std::span<const std::size_t> all,
                                          std::span<const std::size_t> block) {
    std::unordered_set<std::size_t> drop(block.begin(), block.end());
    std::vector<std::size_t> out;
    out.reserve(all.size() - block.size());
    for (const std::size_t r : all)
        if (!drop.count(r)) out.push_back(r);
    return out;
}

}  // namespace

GridFoldLosses fold_losses_grid(const GridLearner& learner, const Dataset& ds,
                                const Subsample& s, const FoldPartition& partition,
                                const LossFn& loss, const std::vector<FittedModel>* full_fits) {
    const std::size_t fold_count = partition.fold_count();

    std::vector<FittedModel> owned_full;
    if (!full_fits) {
        owned_full = learner(s.indices);
        full_fits = &owned_full;
    }
    const std::size_t points = full_fits->size();

    GridFoldLosses out;
    out.per_point.resize(points);
    out.mean_fold_complexity.assign(points, 0.0);
    out.valid.assign(points, 1);
    out.converged.assign(points, 1);
    for (std::size_t q = 0; q < points; ++q) {
        FoldLosses& fl = out.per_point[q];
        fl.fold_count = fold_count;
        fl.sample_count = s.m();
        fl.heldout_loss.resize(fold_count);
        fl.train_loss.resize(fold_count);
        fl.full_loss.resize(fold_count);
        fl.fold_sizes.resize(fold_count);
        const FittedModel& full = (*full_fits)[q];
        if (full.valid)
            fl.full_model_loss = mean_loss(full, ds, s.indices, loss);
        else
            out.valid[q] = 0;
        if (!full.converged) out.converged[q] = 0;
    }

    for (std::size_t j = 0; j < fold_count; ++j) {
        const auto& block = partition.blocks[j];
        const std::vector<std::size_t> train_rows = rows_minus_block(s.indices, block);
        const std::vector<FittedModel> fits = learner(train_rows);
        for (std::size_t q = 0; q < points; ++q) {
            FoldLosses& fl = out.per_point[q];
            fl.fold_sizes[j] = block.size();
            const FittedModel& fit = fits[q];
            if (!fit.valid) {
                out.valid[q] = 0;
                continue;
            }
            fl.heldout_loss[j] = mean_loss(fit, ds, block, loss);
            fl.train_loss[j] = mean_loss(fit, ds, train_rows, loss);
            fl.full_loss[j] = mean_loss(fit, ds, s.indices, loss);
            out.mean_fold_complexity[q] += fit.complexity / static_cast<double>(fold_count);
            if (!fit.converged) out.converged[q] = 0;
        }
    }
    return out;
}

FoldLosses fold_losses(const Learner& learner, const Dataset& ds, const Subsample& s,
                       const FoldPartition& partition, const LossFn& loss) {
    std::size_t current_fold = 0;
    bool fitting_full = false;
    const GridLearner wrapped = [&](std::span<const std::size_t> rows) {
        try {
            return std::vector<FittedModel>{learner(rows)};
        } catch (const std::exception& e) {
            if (fitting_full) throw;
            throw SelectionError("learner failed on fold " + std::to_string(current_fold) +
                                 ": " + e.what());
        }
    };

    // Fit the full-subsample model first so fold indexing in errors is exact.
    fitting_full = true;
    const std::vector<FittedModel> full = wrapped(s.indices);
    fitting_full = false;

    // fold_losses_grid fits blocks in order; track the index for error context.
    GridFoldLosses grid;
    const GridLearner counting = [&](std::span<const std::size_t> rows) {
        const auto fits = wrapped(rows);
        ++current_fold;
        return fits;
    };
    grid = fold_losses_grid(counting, ds, s, partition, loss, &full);
    return grid.per_point.front();
}

double vfcv_criterion(const FoldLosses& fl) {
    double acc = 0.0;
    for (const double h : fl.heldout_loss) acc += h;
    return acc / static_cast<double>(fl.fold_count);
}

double pen_vf(const FoldLosses& fl, double c_v) {
    double acc = 0.0;
    for (std::size_t j = 0; j < fl.fold_count; ++j)
        acc += fl.full_loss[j] - fl.train_loss[j];
    return c_v / static_cast<double>(fl.fold_count) * acc;
}

double penalised_criterion(const FoldLosses& fl, double c_v) {
    return fl.full_model_loss + pen_vf(fl, c_v);
}

double cv_constant(double beta, double fold_count) {
    // (V-1)^beta * V^(1-beta): pow(x, 0) == 1 and pow(x, 1) == x exactly, so
    // beta = 1 gives V-1 and beta = 0 gives V without rounding.
    return std::pow(fold_count - 1.0, beta) * std::pow(fold_count, 1.0 - beta);
}

LearningRate fit_learning_rate(std::span<const std::pair<std::size_t, double>> pen_by_v,
                               std::size_t sample_count) {
    LearningRate lr;
    const double n = static_cast<double>(sample_count);
    for (const auto& [v, pen] : pen_by_v) {
        if (!(pen > 0.0)) continue;
        const double vd = static_cast<double>(v);
        const double x = std::log(n * (vd - 1.0) / vd);
        const double y = std::log(pen / (vd - 1.0)) + std::log(vd);
        lr.points.emplace_back(x, y);
    }
    lr.valid_point_count = lr.points.size();
    if (lr.points.size() < 2) {
        lr.fallback = true;
        lr.beta = 1.0;
        lr.intercept = std::numeric_limits<double>::quiet_NaN();
        return lr;
    }

    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : lr.points) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(lr.points.size());
    my /= static_cast<double>(lr.points.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, y] : lr.points) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if (sxx == 0.0) {
        lr.fallback = true;
        lr.beta = 1.0;
        lr.intercept = std::numeric_limits<double>::quiet_NaN();
        return lr;
    }
    const double slope = sxy / sxx;
    lr.beta = std::clamp(-slope, 0.0, 1.0);
    lr.intercept = my - slope * mx;  // log D(Q)
    return lr;
}

VSweep run_v_sweep(const GridLearner& learner, const Dataset& ds, const Subsample& s,
                   std::span<const std::size_t> v_set, std::uint64_t seed, const LossFn& loss,
                   const std::vector<FittedModel>* full_fits) {
    std::vector<std::size_t> v_values(v_set.begin(), v_set.end());
    std::sort(v_values.begin(), v_values.end());
    v_values.erase(std::unique(v_values.begin(), v_values.end()), v_values.end());

    std::vector<FittedModel> owned_full;
    if (!full_fits) {
        owned_full = learner(s.indices);
        full_fits = &owned_full;
    }

    VSweep sweep;
    sweep.v_values = v_values;
    sweep.per_v.reserve(v_values.size());
    for (const std::size_t v : v_values) {
        const FoldPartition partition =
            partition_folds(s, v, derive_seed(seed, seed_stream::folds, v));
        sweep.per_v.push_back(fold_losses_grid(learner, ds, s, partition, loss, full_fits));
    }
    return sweep;
}

std::vector<LearningRate> learning_rates(const VSweep& sweep, std::size_t sample_count) {
    const std::size_t points =
        sweep.per_v.empty() ? 0 : sweep.per_v.front().per_point.size();
    std::vector<LearningRate> out;
    out.reserve(points);
    for (std::size_t q = 0; q < points; ++q) {
        std::vector<std::pair<std::size_t, double>> pen_by_v;
        pen_by_v.reserve(sweep.v_values.size());
        for (std::size_t k = 0; k < sweep.v_values.size(); ++k) {
            if (!sweep.per_v[k].valid[q]) continue;
            const double v = static_cast<double>(sweep.v_values[k]);
            pen_by_v.emplace_back(sweep.v_values[k],
                                  pen_vf(sweep.per_v[k].per_point[q], v - 1.0));
        }
        out.push_back(fit_learning_rate(pen_by_v, sample_count));
    }
    return out;
}

LearningRate estimate_beta(const Learner& learner, const Dataset& ds, const Subsample& s,
                           std::span<const std::size_t> v_set, std::uint64_t seed,
                           const LossFn& loss) {
    if (v_set.size() < 2) throw ConfigError("estimate_beta needs at least two fold counts");
    const GridLearner wrapped = [&](std::span<const std::size_t> rows) {
        return std::vector<FittedModel>{learner(rows)};
    };
    const VSweep sweep = run_v_sweep(wrapped, ds, s, v_set, seed, loss);
    return learning_rates(sweep, s.m()).front();
}

IdealPenalty ideal_penalty(const Learner& learner, const Dataset& ds, const Subsample& s,
                           std::span<const std::size_t> test_rows, const LossFn& loss,
                           double pen_vf_value) {
    if (test_rows.empty()) throw SizeError("ideal_penalty needs a non-empty test set");
    const FittedModel model = learner(s.indices);
    const double test_loss = mean_loss(model, ds, test_rows, loss);
    const double train_loss = mean_loss(model, ds, s.indices, loss);
    IdealPenalty out;
    out.value = test_loss - train_loss;
    out.gap = pen_vf_value - out.value;
    return out;
}

}  // namespace vfpen
