#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support/oracles.hpp"
#include "vfpen/errors.hpp"
#include "vfpen/rng.hpp"
#include "vfpen/svr.hpp"

using namespace vfpen;

namespace {

Matrix column(const std::vector<double>& values) {
    Matrix m(values.size(), 1);
    for (std::size_t i = 0; i < values.size(); ++i) m(i, 0) = values[i];
    return m;
}

double full_beta_sum(const SvrModel& model) {
    return std::accumulate(model.beta.begin(), model.beta.end(), 0.0);
}

}  // namespace

TEST_CASE("rbf_kernel basics") {
    const std::vector<double> x = {0.3, -1.2};
    CHECK(rbf_kernel(x, x, 2.5) == 1.0);
    CHECK(rbf_kernel(std::vector<double>{0.0}, std::vector<double>{1.0}, 1.0) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-9));

    SplitMix64 rng(1);
    for (int i = 0; i < 10; ++i) {
        const std::vector<double> u = {rng.next_gaussian(), rng.next_gaussian()};
        const std::vector<double> v = {rng.next_gaussian(), rng.next_gaussian()};
        const double g = 0.1 + rng.next_double();
        CHECK(rbf_kernel(u, v, g) == rbf_kernel(v, u, g));
        CHECK(rbf_kernel(u, v, g) > 0.0);
        CHECK(rbf_kernel(u, v, g) <= 1.0);
    }
    CHECK_THROWS_AS(rbf_kernel(std::vector<double>{1.0}, x, 1.0), ShapeError);
    CHECK_THROWS_AS(rbf_kernel(x, x, 0.0), ConfigError);
}

TEST_CASE("single point inside the tube gives the zero model") {
    const Matrix x = column({0.7});
    const std::vector<double> y = {0.0};
    const SvrModel model = fit_svr(x, y, {1.0, 1.0, 0.1});
    CHECK(model.beta.empty());
    CHECK(model.bias == doctest::Approx(0.0));
    CHECK(model.weight_norm == 0.0);
    CHECK(predict_svr(model, std::vector<double>{5.0}) == doctest::Approx(0.0));
    CHECK(model.converged);
}

TEST_CASE("targets inside an epsilon tube around their mean give a constant model") {
    // symmetric targets: the feasible bias interval is centred on the mean
    const Matrix x = column({0.0, 0.25, 0.5, 0.75});
    const std::vector<double> y = {1.05, 0.95, 1.05, 0.95};
    const SvrModel model = fit_svr(x, y, {2.0, 1.0, 0.2});
    CHECK(model.weight_norm == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(model.bias == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(predict_svr(model, x.row(i)) - y[i]) <= 0.2 + 1e-9);
}

TEST_CASE("six-point dual objective matches the brute-force grid within 1e-3") {
    SplitMix64 rng(17);
    const std::size_t n = 6;
    Matrix x(n, 1);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.next_double();
        y[i] = rng.next_gaussian();
    }
    const SvrParams params{1.5, 1.0, 0.1};
    const Matrix gram = gram_from_distances(squared_distances(x), params.gamma);
    const SvrModel model = fit_svr_prepared(x, y, gram, params, 1e-6);
    REQUIRE(model.converged);

    std::vector<double> beta_full(n, 0.0);
    for (std::size_t k = 0; k < model.support_rows.size(); ++k)
        beta_full[model.support_rows[k]] = model.beta[k];
    const double solver_dual = svr_dual_objective(gram, beta_full, y, params.epsilon);

    oracle::DualGrid grid(gram, y, params.cost, params.epsilon, 20);  // step C/20
    const double grid_best = grid.best_dual();
    CHECK(solver_dual >= grid_best - 1e-3);
}

TEST_CASE("kkt certificate and dual feasibility hold on random fits") {
    SplitMix64 rng(23);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t n = 3 + rng.next_below(10);
        const std::size_t d = 1 + rng.next_below(2);
        Matrix x = oracle::random_matrix(n, d, rng);
        std::vector<double> y = oracle::random_targets(n, rng);
        const SvrParams params{0.5 + 4.0 * rng.next_double(), 0.5 + rng.next_double(),
                               0.05 + 0.2 * rng.next_double()};
        const SvrModel model = fit_svr(x, y, params, 1e-4);
        REQUIRE(model.converged);
        CHECK(oracle::kkt_max_violation(model, x, y) <= 1e-3);
        CHECK(std::abs(full_beta_sum(model)) <= 1e-9 * params.cost * n);
        for (const double b : model.beta) CHECK(std::abs(b) <= params.cost * (1.0 + 1e-12));
    }
}

TEST_CASE("dual objective is non-decreasing across solver updates") {
    SplitMix64 rng(5);
    const std::size_t n = 12;
    Matrix x = oracle::random_matrix(n, 2, rng);
    std::vector<double> y = oracle::random_targets(n, rng);
    std::vector<double> trace;
    fit_svr(x, y, {4.0, 1.0, 0.05}, 1e-5, 0, &trace);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-9);
}

TEST_CASE("prediction at a free support vector sits on the tube boundary") {
    SplitMix64 rng(39);
    const std::size_t n = 14;
    Matrix x = oracle::random_matrix(n, 1, rng);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = std::sin(6.0 * x(i, 0));
    const SvrParams params{10.0, 2.0, 0.1};
    const SvrModel model = fit_svr(x, y, params, 1e-5);
    REQUIRE(model.converged);

    bool saw_free = false;
    for (std::size_t k = 0; k < model.beta.size(); ++k) {
        if (std::abs(model.beta[k]) >= params.cost - 1e-6) continue;
        saw_free = true;
        const std::size_t row = model.support_rows[k];
        const double residual = std::abs(y[row] - predict_svr(model, x.row(row)));
        CHECK(residual == doctest::Approx(params.epsilon).epsilon(1e-2));
    }
    CHECK(saw_free);
}

TEST_CASE("predict_svr matches direct arithmetic on a hand-built model") {
    SvrModel model;
    model.support_inputs = column({0.0, 1.0});
    model.beta = {1.0, -1.0};
    model.support_rows = {0, 1};
    model.bias = 0.25;
    model.gamma = 0.5;

    const std::vector<double> q = {0.4};
    const double expected = 1.0 * std::exp(-0.5 * 0.16) - 1.0 * std::exp(-0.5 * 0.36) + 0.25;
    CHECK(predict_svr(model, q) == doctest::Approx(expected).epsilon(1e-12));

    // zero-coefficient model predicts the bias everywhere
    SvrModel flat;
    flat.bias = -1.5;
    CHECK(predict_svr(flat, q) == -1.5);
    CHECK_THROWS_AS(predict_svr(model, std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("weight_norm follows the 2x2 expansion and is order-invariant") {
    SvrModel model;
    model.support_inputs = column({0.0, 2.0});
    model.beta = {1.0, -1.0};
    model.support_rows = {0, 1};
    model.gamma = 0.3;
    const double k = std::exp(-0.3 * 4.0);
    CHECK(weight_norm(model) == doctest::Approx(std::sqrt(2.0 - 2.0 * k)).epsilon(1e-12));

    SvrModel swapped;
    swapped.support_inputs = column({2.0, 0.0});
    swapped.beta = {-1.0, 1.0};
    swapped.support_rows = {1, 0};
    swapped.gamma = 0.3;
    CHECK(weight_norm(swapped) == doctest::Approx(weight_norm(model)).epsilon(1e-12));

    SvrModel empty;
    CHECK(weight_norm(empty) == 0.0);
}

TEST_CASE("stored weight_norm agrees with the recomputed expansion") {
    SplitMix64 rng(8);
    const std::size_t n = 10;
    Matrix x = oracle::random_matrix(n, 2, rng);
    std::vector<double> y = oracle::random_targets(n, rng);
    const SvrModel model = fit_svr(x, y, {3.0, 1.5, 0.05}, 1e-5);
    CHECK(model.weight_norm == doctest::Approx(weight_norm(model)).epsilon(1e-8));
}

TEST_CASE("support vector count is non-increasing in epsilon") {
    SplitMix64 rng(61);
    const std::size_t n = 24;
    Matrix x(n, 1);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = static_cast<double>(i) / n;
        y[i] = std::sin(6.28318 * x(i, 0)) + 0.05 * rng.next_gaussian();
    }
    std::size_t previous = n + 1;
    for (const double eps : {0.02, 0.1, 0.3, 0.6}) {
        const SvrModel model = fit_svr(x, y, {5.0, 4.0, eps}, 1e-5);
        REQUIRE(model.converged);
        CHECK(model.beta.size() <= previous);
        previous = model.beta.size();
    }
}

TEST_CASE("slacks are post-hoc hinge residuals") {
    const Matrix x = column({0.0, 1.0});
    const std::vector<double> y = {0.0, 2.0};
    SvrModel flat;
    flat.bias = 0.0;
    flat.epsilon = 0.5;
    flat.cost = 2.0;
    const SvrSlacks slacks = svr_slacks(flat, x, y);
    CHECK(slacks.xi[0] == 0.0);
    CHECK(slacks.xi_star[0] == 0.0);
    CHECK(slacks.xi[1] == doctest::Approx(1.5));  // y - f - eps = 2 - 0 - 0.5
    CHECK(slacks.xi_star[1] == 0.0);
    CHECK(svr_primal_objective(flat, x, y) == doctest::Approx(2.0 * 1.5));
}

TEST_CASE("gram matrix has a unit diagonal and is symmetric") {
    SplitMix64 rng(3);
    const Matrix x = oracle::random_matrix(6, 2, rng);
    const Matrix gram = gram_from_distances(squared_distances(x), 1.7);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(gram(i, i) == 1.0);
        for (std::size_t j = 0; j < 6; ++j) CHECK(gram(i, j) == gram(j, i));
    }
}

TEST_CASE("svr models serialise their dual expansion") {
    SplitMix64 rng(91);
    const Matrix x = oracle::random_matrix(8, 1, rng);
    const std::vector<double> y = oracle::random_targets(8, rng);
    const SvrModel model = fit_svr(x, y, {2.0, 1.0, 0.05}, 1e-5);
    const nlohmann::json j = svr_to_json(model);
    CHECK(j["beta"].size() == model.beta.size());
    CHECK(j["support_inputs"].size() == model.beta.size());
    CHECK(j["gamma"].get<double>() == model.gamma);
    CHECK(j["bias"].get<double>() == model.bias);
}

TEST_CASE("non-convergence is flagged, not thrown") {
    SplitMix64 rng(71);
    const std::size_t n = 20;
    Matrix x = oracle::random_matrix(n, 1, rng);
    std::vector<double> y = oracle::random_targets(n, rng);
    // One pass of updates cannot reach a 1e-12 gap on this problem.
    const SvrModel model = fit_svr(x, y, {100.0, 1.0, 0.0}, 1e-12, 1);
    CHECK_FALSE(model.converged);
    CHECK(model.kkt_gap >= 1e-12);
}
