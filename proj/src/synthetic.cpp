#include "vfpen/synthetic.hpp"

#include <cmath>

#include "vfpen/errors.hpp"
#include "vfpen/rng.hpp"

namespace vfpen {

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = nlohmann::json{{"kind", s.kind}, {"n", s.n}, {"d", s.d}, {"noise", s.noise},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    s.kind = j.value("kind", s.kind);
    s.n = j.value("n", s.n);
    s.d = j.value("d", s.d);
    s.noise = j.value("noise", s.noise);
    s.seed = j.value("seed", s.seed);
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 4) throw ConfigError("synthetic datasets need n >= 4");
    if (spec.d < 1) throw ConfigError("synthetic datasets need d >= 1");
    if (spec.noise < 0.0) throw ConfigError("noise level must be non-negative");
    if (spec.kind != "sine" && spec.kind != "hetero")
        throw ConfigError("unknown synthetic kind '" + spec.kind + "'");

    SplitMix64 rng(derive_seed(spec.seed, seed_stream::synthetic, 0));

    std::vector<double> weights;
    if (spec.kind == "hetero") {
        weights.resize(spec.d);
        for (double& w : weights) w = rng.next_gaussian();
    }

    Dataset ds;
    ds.name = spec.kind + "-synthetic";
    ds.features = Matrix(spec.n, spec.d);
    ds.targets.resize(spec.n);
    constexpr double two_pi = 2.0 * 3.14159265358979323846;
    for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t j = 0; j < spec.d; ++j) ds.features(i, j) = rng.next_double();
        const double x1 = ds.features(i, 0);
        if (spec.kind == "sine") {
            ds.targets[i] = std::sin(two_pi * x1);
            if (spec.noise > 0.0) ds.targets[i] += spec.noise * rng.next_gaussian();
        } else {
            double lin = 0.0;
            for (std::size_t j = 0; j < spec.d; ++j) lin += weights[j] * ds.features(i, j);
            ds.targets[i] = lin;
            if (spec.noise > 0.0)
                ds.targets[i] += spec.noise * (0.5 + x1) * rng.next_gaussian();
        }
    }
    return ds;
}

}  // namespace vfpen
