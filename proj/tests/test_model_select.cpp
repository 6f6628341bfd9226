#include <cmath>
#include <limits>

#include "doctest.h"
#include "support/oracles.hpp"
#include "vfpen/errors.hpp"
#include "vfpen/model_select.hpp"
#include "vfpen/rng.hpp"
#include "vfpen/synthetic.hpp"

using namespace vfpen;

namespace {

Subsample subsample_of(const Dataset& ds, std::size_t m, std::uint64_t seed) {
    Realisation r;
    for (std::size_t i = 0; i < ds.n(); ++i) r.train_indices.push_back(i);
    return make_subsample(r, m, seed);
}

}  // namespace

TEST_CASE("default grids match the protocol") {
    const HyperGrid svr = build_grid(LearnerKind::svr);
    CHECK(svr.size() == 168);  // 12 x 7 x 2
    CHECK(svr.svr_points.front().cost == doctest::Approx(std::ldexp(1.0, -10)));
    CHECK(svr.svr_points.back().cost == doctest::Approx(std::ldexp(1.0, 12)));
    CHECK(svr.svr_gamma_list.front() == doctest::Approx(std::ldexp(1.0, -10)));
    CHECK(svr.svr_gamma_list.back() == doctest::Approx(std::ldexp(1.0, 2)));
    CHECK(svr.svr_epsilon_list ==
          std::vector<double>{std::ldexp(1.0, -4), std::ldexp(1.0, -3)});

    const HyperGrid cart = build_grid(LearnerKind::cart);
    CHECK(cart.cart_sizes ==
          std::vector<std::size_t>{1, 2, 3, 5, 7, 10, 15, 22, 31, 44, 63, 90, 127});

    GridOverrides one_c;
    one_c.svr_cost = std::vector<double>{1.0};
    CHECK(build_grid(LearnerKind::svr, one_c).size() == 14);  // 1 x 7 x 2

    GridOverrides empty;
    empty.cart_sizes = std::vector<std::size_t>{};
    CHECK_THROWS_AS(build_grid(LearnerKind::cart, empty), ConfigError);
    GridOverrides negative;
    negative.svr_gamma = std::vector<double>{-1.0};
    CHECK_THROWS_AS(build_grid(LearnerKind::svr, negative), ConfigError);
}

TEST_CASE("singleton grid selects its only point under every method") {
    const Dataset ds = generate_synthetic({"sine", 80, 1, 0.3, 11});
    const Subsample sub = subsample_of(ds, 24, 3);
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 40; i < 80; ++i) test_rows.push_back(i);

    GridOverrides overrides;
    overrides.cart_sizes = std::vector<std::size_t>{7};
    const HyperGrid grid = build_grid(LearnerKind::cart, overrides);

    SelectionOptions options;
    options.fold_count = 2;
    options.v_sweep = {2, 3, 4};
    options.seed = 5;
    for (const Method method :
         {Method::vfcv, Method::penvf, Method::penvf_plus, Method::ideal}) {
        const SelectionResult res =
            select(method, LearnerKind::cart, grid, ds, sub, test_rows, options);
        CHECK(res.chosen_index == 0);
        CHECK(res.criterion.size() == 1);
    }
}

TEST_CASE("vfcv picks the stump when noise dominates") {
    // Pure-noise targets: a stump generalises better than a deep tree.
    SplitMix64 rng(29);
    Dataset ds;
    ds.features = Matrix(40, 1);
    ds.targets.resize(40);
    for (std::size_t i = 0; i < 40; ++i) {
        ds.features(i, 0) = rng.next_double();
        ds.targets[i] = rng.next_gaussian();
    }
    const Subsample sub = subsample_of(ds, 40, 1);

    GridOverrides overrides;
    overrides.cart_sizes = std::vector<std::size_t>{1, 31};
    const HyperGrid grid = build_grid(LearnerKind::cart, overrides);
    SelectionOptions options;
    options.fold_count = 2;
    options.seed = 7;
    const SelectionResult res =
        select(Method::vfcv, LearnerKind::cart, grid, ds, sub, {}, options);
    REQUIRE(res.criterion.size() == 2);
    CHECK(res.criterion[0] < res.criterion[1]);
    CHECK(res.chosen_index == 0);
}

TEST_CASE("selection is deterministic under equal seeds") {
    const Dataset ds = generate_synthetic({"sine", 100, 2, 0.4, 17});
    const Subsample sub = subsample_of(ds, 40, 9);
    SelectionOptions options;
    options.fold_count = 4;
    options.seed = 1234;
    const HyperGrid grid = build_grid(LearnerKind::cart);

    const SelectionResult a =
        select(Method::penvf, LearnerKind::cart, grid, ds, sub, {}, options);
    const SelectionResult b =
        select(Method::penvf, LearnerKind::cart, grid, ds, sub, {}, options);
    CHECK(a.chosen_index == b.chosen_index);
    CHECK(a.criterion == b.criterion);  // bitwise identical tables
    CHECK(a.matched_complexity == b.matched_complexity);
}

TEST_CASE("invalid grid points get an infinite criterion; all-invalid throws") {
    const Dataset ds = generate_synthetic({"sine", 30, 1, 0.1, 2});
    const Subsample sub = subsample_of(ds, 12, 1);

    const auto make_learner = [&ds](bool all_bad) {
        return GridLearner([&ds, all_bad](std::span<const std::size_t>) {
            std::vector<FittedModel> fits(2);
            fits[0].valid = false;
            fits[0].predict_row = [](std::size_t) { return 0.0; };
            fits[1].valid = !all_bad;
            fits[1].predict_row = [&ds](std::size_t row) { return ds.targets[row] * 0.5; };
            return fits;
        });
    };

    SelectionOptions options;
    options.fold_count = 2;
    const SelectionResult res =
        select_with_learner(Method::vfcv, make_learner(false), 2, ds, sub, {}, options);
    CHECK(res.criterion[0] == std::numeric_limits<double>::infinity());
    CHECK(res.chosen_index == 1);

    CHECK_THROWS_AS(
        select_with_learner(Method::vfcv, make_learner(true), 2, ds, sub, {}, options),
        SelectionError);
}

TEST_CASE("pick_nearest implements the nearest-with-smaller-index rule") {
    const std::vector<double> norms = {0.5, 1.0, 2.0};
    CHECK(pick_nearest(norms, 1.1) == 1);
    CHECK(pick_nearest(norms, 2.0) == 2);  // exact match
    const std::vector<double> tie = {1.0, 3.0};
    CHECK(pick_nearest(tie, 2.0) == 0);  // equidistant: smaller index (smaller C)
}

TEST_CASE("match_complexity_cart rounds half up and regrows") {
    const Dataset ds = generate_synthetic({"sine", 60, 1, 0.2, 4});
    const Subsample sub = subsample_of(ds, 30, 2);
    SelectionOptions options;

    const CartMatch a = match_complexity_cart(6.4, ds, sub, options);
    CHECK(a.size_bound == 6);
    CHECK(a.tree.size() <= 6);

    const CartMatch b = match_complexity_cart(6.5, ds, sub, options);
    CHECK(b.size_bound == 7);

    const CartMatch c = match_complexity_cart(1.0, ds, sub, options);
    CHECK(c.size_bound == 1);
    CHECK(c.tree.size() == 1);
}

TEST_CASE("match_complexity_svr returns the refit with the nearest norm") {
    const Dataset ds = generate_synthetic({"sine", 40, 1, 0.15, 6});
    const Subsample sub = subsample_of(ds, 20, 3);

    GridOverrides overrides;
    overrides.svr_cost = std::vector<double>{0.25, 1.0, 4.0};
    overrides.svr_gamma = std::vector<double>{1.0};
    overrides.svr_epsilon = std::vector<double>{0.1};
    const HyperGrid grid = build_grid(LearnerKind::svr, overrides);

    SelectionOptions options;
    options.svr_tol = 1e-5;

    // Reference refits computed directly.
    const Matrix sub_x = ds.features.take_rows(sub.indices);
    std::vector<double> sub_y;
    for (const std::size_t r : sub.indices) sub_y.push_back(ds.targets[r]);
    std::vector<double> norms;
    for (const double c : *overrides.svr_cost)
        norms.push_back(fit_svr(sub_x, sub_y, {c, 1.0, 0.1}, 1e-5).weight_norm);

    for (const double target : {norms[0] * 0.9, (norms[0] + norms[1]) / 2.1, norms[2] * 1.5}) {
        const SvrMatch match = match_complexity_svr(target, grid, 1, ds, sub, options);
        const std::size_t expected = pick_nearest(norms, target);
        CHECK(match.model.weight_norm == doctest::Approx(norms[expected]).epsilon(1e-9));
        CHECK_FALSE(match.fallback);
        CHECK(match.grid_index == expected);  // 1 gamma x 1 eps keeps indices aligned
    }
}

TEST_CASE("svr selection records the mean fold norm at the chosen point") {
    const Dataset ds = generate_synthetic({"sine", 48, 1, 0.2, 8});
    const Subsample sub = subsample_of(ds, 16, 4);

    GridOverrides overrides;
    overrides.svr_cost = std::vector<double>{0.5, 2.0};
    overrides.svr_gamma = std::vector<double>{1.0};
    overrides.svr_epsilon = std::vector<double>{0.125};
    const HyperGrid grid = build_grid(LearnerKind::svr, overrides);

    SelectionOptions options;
    options.fold_count = 2;
    options.seed = 99;
    options.svr_tol = 1e-5;
    const SelectionResult res =
        select(Method::vfcv, LearnerKind::svr, grid, ds, sub, {}, options);

    // Recompute the fold fits from the same derived partition.
    const FoldPartition partition =
        partition_folds(sub, 2, derive_seed(options.seed, seed_stream::folds, 2));
    double norm_sum = 0.0;
    for (const auto& block : partition.blocks) {
        std::vector<std::size_t> train_rows;
        for (const std::size_t idx : sub.indices)
            if (std::find(block.begin(), block.end(), idx) == block.end())
                train_rows.push_back(idx);
        const Matrix x = ds.features.take_rows(train_rows);
        std::vector<double> y;
        for (const std::size_t r : train_rows) y.push_back(ds.targets[r]);
        norm_sum += fit_svr(x, y, grid.svr_points[res.chosen_index], 1e-5).weight_norm;
    }
    CHECK(res.mean_fold_complexity == doctest::Approx(norm_sum / 2.0).epsilon(1e-12));
    CHECK(res.matched_complexity == res.mean_fold_complexity);
}

TEST_CASE("equal penalties reduce penvf to the empirical argmin") {
    GridFoldLosses gfl;
    SplitMix64 rng(12);
    const std::size_t points = 6;
    for (std::size_t q = 0; q < points; ++q) {
        FoldLosses fl;
        fl.fold_count = 2;
        fl.sample_count = 10;
        fl.fold_sizes = {5, 5};
        fl.heldout_loss = {0.0, 0.0};
        fl.train_loss = {0.4, 0.5};
        fl.full_loss = {0.4 + 0.05, 0.5 + 0.07};  // same gap at every point
        fl.full_model_loss = rng.next_double();
        gfl.per_point.push_back(fl);
        gfl.mean_fold_complexity.push_back(1.0);
        gfl.valid.push_back(1);
        gfl.converged.push_back(1);
    }
    std::size_t plain = 0;
    for (std::size_t q = 1; q < points; ++q)
        if (gfl.per_point[q].full_model_loss < gfl.per_point[plain].full_model_loss)
            plain = q;
    for (const double alpha : {0.3, 1.0, 2.5}) {
        const auto crit = criterion_table(Method::penvf, gfl, 2, alpha);
        CHECK(criterion_argmin(crit) == plain);
    }
}

TEST_CASE("the ideal criterion at the chosen point is a grid-wide minimum") {
    const Dataset ds = generate_synthetic({"sine", 120, 1, 0.4, 31});
    const Subsample sub = subsample_of(ds, 40, 8);
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 60; i < 120; ++i) test_rows.push_back(i);

    const HyperGrid grid = build_grid(LearnerKind::cart);
    SelectionOptions options;
    options.fold_count = 2;
    const SelectionResult res =
        select(Method::ideal, LearnerKind::cart, grid, ds, sub, test_rows, options);
    for (const double value : res.criterion)
        CHECK(res.criterion_at_chosen <= value + 1e-15);
}

TEST_CASE("ideal selection beats vfcv on average (it reads the test set)") {
    double vfcv_total = 0.0, ideal_total = 0.0;
    const std::size_t reps = 50;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        const Dataset ds =
            standardize(generate_synthetic({"sine", 200, 1, 0.35, 1000 + rep}));
        const auto reals = make_realisations(ds, 1, 0.5, 50 + rep);
        const Subsample sub = make_subsample(reals[0], 100, 77 + rep);
        const std::span<const std::size_t> test_rows = reals[0].test_indices;

        SelectionOptions options;
        options.fold_count = 5;
        options.seed = 900 + rep;
        const HyperGrid grid = build_grid(LearnerKind::cart);

        const SelectionResult vf =
            select(Method::vfcv, LearnerKind::cart, grid, ds, sub, test_rows, options);
        const SelectionResult id =
            select(Method::ideal, LearnerKind::cart, grid, ds, sub, test_rows, options);
        vfcv_total += mean_loss(vf.final_model, ds, test_rows);
        ideal_total += mean_loss(id.final_model, ds, test_rows);
    }
    CHECK(ideal_total / reps <= vfcv_total / reps + 1e-12);
}

TEST_CASE("selection results serialise to json with the full table") {
    const Dataset ds = generate_synthetic({"sine", 60, 1, 0.3, 14});
    const Subsample sub = subsample_of(ds, 30, 6);
    std::vector<std::size_t> test_rows = {40, 41, 42, 43};

    GridOverrides overrides;
    overrides.cart_sizes = std::vector<std::size_t>{1, 7};
    const HyperGrid grid = build_grid(LearnerKind::cart, overrides);
    SelectionOptions options;
    options.fold_count = 2;
    SelectionResult res = select(Method::vfcv, LearnerKind::cart, grid, ds, sub, {}, options);
    res.test_mae = mean_loss(res.final_model, ds, test_rows);

    const nlohmann::json j = selection_to_json(res, grid);
    CHECK(j["method"] == "vfcv");
    CHECK(j["criterion"].size() == 2);
    CHECK(j["chosen"].contains("t"));
    CHECK(j["matched_complexity"].get<double>() == res.matched_complexity);
    CHECK(j["test_mae"].get<double>() == res.test_mae);
}

TEST_CASE("method and learner names round-trip") {
    for (const Method m : {Method::vfcv, Method::penvf, Method::penvf_plus, Method::ideal})
        CHECK(method_from_string(to_string(m)) == m);
    CHECK(learner_from_string("cart") == LearnerKind::cart);
    CHECK(learner_from_string("svr") == LearnerKind::svr);
    CHECK_THROWS_AS(method_from_string("nope"), ConfigError);
    CHECK_THROWS_AS(learner_from_string("forest"), ConfigError);
}
