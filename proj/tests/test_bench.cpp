#include <cmath>
#include <sstream>

#include "doctest.h"
#include "support/oracles.hpp"
#include "vfpen/bench.hpp"
#include "vfpen/errors.hpp"
#include "vfpen/rng.hpp"
#include "vfpen/sha256.hpp"

using namespace vfpen;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.datasets = {"synth-sine"};
    cfg.learner = LearnerKind::cart;
    cfg.subsample_size = 24;
    cfg.fold_counts = {2};
    cfg.alphas = {1.0};
    cfg.methods = {Method::vfcv, Method::penvf, Method::penvf_plus, Method::ideal};
    cfg.realisations = 3;
    cfg.seed = 42;
    cfg.v_sweep = {2, 3, 4};
    cfg.grid.cart_sizes = std::vector<std::size_t>{1, 3, 7, 15};
    cfg.threads = 1;
    return cfg;
}

std::string csv_of(const ExperimentReport& report) {
    std::ostringstream out;
    write_report_csv(report, out);
    return out.str();
}

}  // namespace

TEST_CASE("mean_absolute_error basics") {
    const std::vector<double> y = {1.0, -1.0};
    CHECK(mean_absolute_error(y, y) == 0.0);
    CHECK(mean_absolute_error(std::vector<double>{0.0, 0.0}, y) == doctest::Approx(1.0));

    SplitMix64 rng(4);
    for (int i = 0; i < 5; ++i) {
        std::vector<double> a = oracle::random_targets(6, rng);
        std::vector<double> b = oracle::random_targets(6, rng);
        const double c = 3.7;
        std::vector<double> ac = a, bc = b;
        for (std::size_t k = 0; k < 6; ++k) {
            ac[k] *= c;
            bc[k] *= c;
        }
        CHECK(mean_absolute_error(ac, bc) ==
              doctest::Approx(c * mean_absolute_error(a, b)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(mean_absolute_error(std::vector<double>{1.0}, y), ShapeError);
}

TEST_CASE("paired_t_test conventions and the hand value") {
    const std::vector<double> same = {0.25, 0.5, 0.75};
    const TTest zero = paired_t_test(same, same);
    CHECK(zero.t == 0.0);
    CHECK(zero.p == 1.0);
    CHECK_FALSE(zero.degenerate);

    const std::vector<double> shifted = {1.25, 1.5, 1.75};  // exactly constant diff
    const TTest degen = paired_t_test(shifted, same);
    CHECK(degen.degenerate);
    CHECK(degen.p == 0.0);
    CHECK(std::isinf(degen.t));

    const std::vector<double> a = {1.0, 2.0, 3.0};
    const std::vector<double> b = {0.0, 0.0, 0.0};
    const TTest hand = paired_t_test(a, b);
    CHECK(hand.t == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
    CHECK(hand.p == doctest::Approx(oracle::two_sided_p_oracle(hand.t, 2.0)).epsilon(1e-6));

    CHECK_THROWS_AS(paired_t_test(a, std::vector<double>{1.0, 2.0}), ShapeError);
    CHECK_THROWS_AS(paired_t_test(std::vector<double>{1.0}, std::vector<double>{1.0}),
                    SizeError);
}

TEST_CASE("p-values agree with the quadrature oracle") {
    SplitMix64 rng(6);
    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t n = 2 + rng.next_below(28);
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.next_gaussian();
            b[i] = rng.next_gaussian() + 0.2;
        }
        const TTest tt = paired_t_test(a, b);
        if (tt.degenerate) continue;
        CHECK(std::abs(tt.p - oracle::two_sided_p_oracle(tt.t, static_cast<double>(n - 1))) <
              1e-6);
    }
}

TEST_CASE("synthetic generator: exactness, determinism, moments") {
    const Dataset clean = generate_synthetic({"sine", 100, 1, 0.0, 9});
    for (std::size_t i = 0; i < 100; ++i)
        CHECK(clean.targets[i] ==
              doctest::Approx(std::sin(2.0 * 3.14159265358979323846 * clean.features(i, 0)))
                  .epsilon(1e-12));

    const Dataset a = generate_synthetic({"hetero", 50, 3, 0.5, 11});
    const Dataset b = generate_synthetic({"hetero", 50, 3, 0.5, 11});
    CHECK(a.features.data() == b.features.data());
    CHECK(a.targets == b.targets);

    const Dataset noisy = generate_synthetic({"sine", 100000, 1, 0.3, 13});
    double sum = 0.0, sq = 0.0;
    for (const double t : noisy.targets) {
        sum += t;
        sq += t * t;
    }
    const double mean_t = sum / 100000.0;
    const double var = sq / 100000.0 - mean_t * mean_t;
    CHECK(var == doctest::Approx(0.59).epsilon(0.10));  // Var(sin) + noise^2

    CHECK_THROWS_AS(generate_synthetic({"sine", 3, 1, 0.0, 1}), ConfigError);
    CHECK_THROWS_AS(generate_synthetic({"waves", 100, 1, 0.0, 1}), ConfigError);
}

TEST_CASE("registry resolves synthetics and explains missing downloads") {
    CHECK(find_dataset("abalone-synth") != nullptr);
    const Dataset ds = resolve_dataset("abalone-synth", "data");
    CHECK(ds.n() == 4177);
    CHECK(ds.d() == 8);

    CHECK_THROWS_WITH_AS(resolve_dataset("winequality-red", "data"),
                         doctest::Contains("archive.ics.uci.edu"), DatasetResolutionError);
    CHECK_THROWS_AS(resolve_dataset("no-such-dataset", "data"), DatasetResolutionError);

    const DatasetInfo* abalone = find_dataset("abalone");
    REQUIRE(abalone != nullptr);
    CHECK(default_learn_fraction(*abalone) ==
          doctest::Approx(835.0 / 4177.0).epsilon(1e-12));
}

TEST_CASE("config json round-trips and validates") {
    ExperimentConfig cfg = tiny_config();
    cfg.learn_fraction = 0.4;
    cfg.standardize_mode = "train";
    nlohmann::json j;
    to_json(j, cfg);
    ExperimentConfig back;
    from_json(j, back);
    CHECK(back.datasets == cfg.datasets);
    CHECK(back.fold_counts == cfg.fold_counts);
    CHECK(back.methods == cfg.methods);
    CHECK(back.grid.cart_sizes == cfg.grid.cart_sizes);
    CHECK(back.standardize_mode == "train");
    CHECK(back.learn_fraction == cfg.learn_fraction);

    // "dataset" as a plain string is accepted
    const ExperimentConfig from_string = [] {
        ExperimentConfig c;
        from_json(nlohmann::json{{"dataset", "synth-sine"}, {"m", 30}}, c);
        return c;
    }();
    CHECK(from_string.datasets == std::vector<std::string>{"synth-sine"});
    CHECK(from_string.subsample_size == 30);

    ExperimentConfig bad = tiny_config();
    bad.fold_counts = {40};  // exceeds m
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = tiny_config();
    bad.alphas = {-0.5};
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = tiny_config();
    bad.standardize_mode = "sometimes";
    CHECK_THROWS_AS(validate(bad), ConfigError);
    bad = tiny_config();
    bad.loss = "rmse";
    CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("run_experiment: cells, determinism, report arithmetic") {
    const ExperimentConfig cfg = tiny_config();
    const ExperimentReport report = run_experiment(cfg);

    // one dataset x 4 methods x 1 V x 1 alpha
    CHECK(report.cells.size() == 4);
    for (const CellStats& cell : report.cells) {
        CHECK(cell.errors.size() == cfg.realisations);
        CHECK(cell.chosen_index.size() == cfg.realisations);
        CHECK(cell.mean_mae == doctest::Approx(mean(cell.errors)).epsilon(1e-12));
        CHECK(cell.sd_mae == doctest::Approx(sample_sd(cell.errors)).epsilon(1e-12));
        // verdict consistency: recomputable from the stored vectors
        if (cell.method == Method::vfcv) {
            CHECK(cell.verdict == 0);
        } else {
            const CellStats& baseline = report.cells.front();  // vfcv is first
            const TTest tt = paired_t_test(cell.errors, baseline.errors);
            const int expected =
                tt.p >= 0.1 ? 0 : (cell.mean_mae < baseline.mean_mae ? 1 : -1);
            CHECK(cell.verdict == expected);
            CHECK(cell.p_vs_vfcv == doctest::Approx(tt.p).epsilon(1e-12));
        }
    }

    const ExperimentReport rerun = run_experiment(cfg);
    CHECK(csv_of(report) == csv_of(rerun));  // byte-identical

    // csv row count = |methods| x |V| x |alpha| + header
    std::istringstream lines(csv_of(report));
    std::size_t count = 0;
    std::string line;
    while (std::getline(lines, line)) ++count;
    CHECK(count == 1 + 4);
}

TEST_CASE("threaded and single-threaded runs produce identical reports") {
    ExperimentConfig cfg = tiny_config();
    cfg.realisations = 4;
    cfg.threads = 1;
    const std::string serial = csv_of(run_experiment(cfg));
    cfg.threads = 2;
    const std::string parallel = csv_of(run_experiment(cfg));
    CHECK(serial == parallel);
}

TEST_CASE("singleton grid makes every method pick the same model") {
    ExperimentConfig cfg = tiny_config();
    cfg.grid.cart_sizes = std::vector<std::size_t>{7};
    cfg.methods = {Method::vfcv, Method::penvf};
    cfg.realisations = 1;
    const ExperimentReport report = run_experiment(cfg);
    REQUIRE(report.cells.size() == 2);
    CHECK(report.cells[0].errors == report.cells[1].errors);
    CHECK(report.cells[1].verdict == 0);
}

TEST_CASE("report json round-trips exactly") {
    const ExperimentReport report = run_experiment(tiny_config());
    const nlohmann::json j = report_to_json(report);
    const ExperimentReport back = report_from_json(j);
    REQUIRE(back.cells.size() == report.cells.size());
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        CHECK(back.cells[i].errors == report.cells[i].errors);
        CHECK(back.cells[i].chosen_index == report.cells[i].chosen_index);
        CHECK(back.cells[i].mean_mae == report.cells[i].mean_mae);
        CHECK(back.cells[i].sd_mae == report.cells[i].sd_mae);
        CHECK(back.cells[i].p_vs_vfcv == report.cells[i].p_vs_vfcv);
        CHECK(back.cells[i].t_vs_vfcv == report.cells[i].t_vs_vfcv);
        CHECK(back.cells[i].verdict == report.cells[i].verdict);
    }
    CHECK(back.config.subsample_size == report.config.subsample_size);
}

TEST_CASE("win/draw/loss rows partition the datasets") {
    ExperimentConfig cfg = tiny_config();
    cfg.datasets = {"synth-sine", "synth-sine-2d"};
    cfg.realisations = 2;
    cfg.methods = {Method::vfcv, Method::penvf};
    const ExperimentReport report = run_experiment(cfg);
    const auto rows = win_draw_loss_table(report);
    for (const WinsRow& row : rows)
        CHECK(row.wins + row.draws + row.losses == 2);  // two datasets

    std::ostringstream out;
    write_wins_csv(rows, out);
    std::istringstream lines(out.str());
    std::string line;
    std::size_t count = 0;
    while (std::getline(lines, line)) ++count;
    CHECK(count == 1 + rows.size());
}

TEST_CASE("penalty trace rows follow grid order and stay finite") {
    ExperimentConfig cfg = tiny_config();
    cfg.realisations = 2;
    const auto rows = penalty_gap_trace(cfg);
    REQUIRE(!rows.empty());
    CHECK(rows.size() == 2 * cfg.grid.cart_sizes->size());

    std::size_t previous_realisation = 0;
    std::size_t previous_index = 0;
    bool first = true;
    bool saw_t1 = false;
    for (const TraceRow& row : rows) {
        if (!first && row.realisation == previous_realisation)
            CHECK(row.grid_index > previous_index);
        previous_realisation = row.realisation;
        previous_index = row.grid_index;
        first = false;
        if (row.grid_index == 0) saw_t1 = true;  // t = 1 row present
        CHECK(std::isfinite(row.pen_ideal));
        CHECK(std::isfinite(row.pen_vf));
        CHECK(std::isfinite(row.pen_vf_plus));
        CHECK(row.gap_vf == doctest::Approx(row.pen_vf - row.pen_ideal));
    }
    CHECK(saw_t1);

    const HyperGrid grid = build_grid(cfg.learner, cfg.grid);
    std::ostringstream jsonl, csv;
    write_trace_jsonl(rows, grid, jsonl);
    write_trace_csv(rows, grid, csv);
    CHECK(!jsonl.str().empty());
    CHECK(csv.str().rfind("realisation,", 0) == 0);

    const auto rerun = penalty_gap_trace(cfg);
    CHECK(rerun.size() == rows.size());
    CHECK(rerun.front().pen_vf == rows.front().pen_vf);
}

TEST_CASE("sha256 matches the reference vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
