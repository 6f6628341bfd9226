#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "vfpen/dataset.hpp"

namespace vfpen {

// Offline substitutes for the benchmark sources. Features are uniform on
// [0,1)^d. Kinds:
//   sine:   y = sin(2*pi*x1) + noise * g
//   hetero: y = w.x + noise * (0.5 + x1) * g, weights drawn once from the seed
// with g standard normal.
struct SyntheticSpec {
    std::string kind = "sine";
    std::size_t n = 1000;
    std::size_t d = 1;
    double noise = 0.0;
    std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace vfpen
