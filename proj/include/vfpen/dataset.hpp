#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vfpen/matrix.hpp"

namespace vfpen {

struct Dataset {
    std::string name;
    Matrix features;              // n x d
    std::vector<double> targets;  // n

    std::size_t n() const { return targets.size(); }
    std::size_t d() const { return features.cols(); }
};

// Reads a numeric CSV with one header row; the last column is the target.
// Throws ParseError naming the offending row/column for non-numeric or
// non-finite cells, SizeError when fewer than two data rows are present.
Dataset load_csv(const std::filesystem::path& path);

// Shifts every feature column and the target to mean 0 and population
// (divide-by-n) standard deviation 1. Constant columns become all zero.
Dataset standardize(const Dataset& ds);

// Same transform with statistics computed on stat_rows only, applied to every
// row (per-realisation mode for leakage-sensitive studies).
Dataset standardize_with(const Dataset& ds, std::span<const std::size_t> stat_rows);

// One fixed random learn/test split of a dataset.
struct Realisation {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const Realisation& r);
void from_json(const nlohmann::json& j, Realisation& r);

// Manifest for exact reruns: dataset name plus every split's seed and indices.
nlohmann::json realisation_manifest(const std::string& dataset_name,
                                    std::span<const Realisation> realisations);
std::vector<Realisation> realisations_from_manifest(const nlohmann::json& manifest,
                                                    std::string* dataset_name = nullptr);

// `count` fresh disjoint splits with |train| = round(learn_fraction * n),
// deterministic under `seed`.
std::vector<Realisation> make_realisations(const Dataset& ds, std::size_t count,
                                           double learn_fraction, std::uint64_t seed);

// Uniform sample without replacement from a realisation's training rows.
struct Subsample {
    std::vector<std::size_t> indices;
    std::uint64_t seed = 0;

    std::size_t m() const { return indices.size(); }
};

Subsample make_subsample(const Realisation& r, std::size_t m, std::uint64_t seed);

// V blocks B_1..B_V, pairwise disjoint, sizes within one of each other,
// covering the subsample exactly.
struct FoldPartition {
    std::vector<std::vector<std::size_t>> blocks;

    std::size_t fold_count() const { return blocks.size(); }
};

FoldPartition partition_folds(const Subsample& s, std::size_t fold_count, std::uint64_t seed);

}  // namespace vfpen
