#include "vfpen/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "vfpen/errors.hpp"
#include "vfpen/rng.hpp"

namespace vfpen {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> tokens;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) tokens.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') tokens.emplace_back();
    return tokens;
}

double parse_cell(const std::string& token, std::size_t data_row, std::size_t col) {
    double value = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw ParseError("non-numeric cell at row " + std::to_string(data_row) + ", column " +
                         std::to_string(col) + ": '" + token + "'");
    if (!std::isfinite(value))
        throw ParseError("non-finite cell at row " + std::to_string(data_row) + ", column " +
                         std::to_string(col) + ": '" + token + "'");
    return value;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file '" + path.string() + "'");
    const std::size_t columns = split_line(line).size();
    if (columns < 2)
        throw ParseError("expected at least 2 columns (features + target) in '" +
                         path.string() + "'");

    std::vector<std::vector<double>> rows;
    std::size_t data_row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++data_row;
        const auto tokens = split_line(line);
        if (tokens.size() != columns)
            throw ParseError("row " + std::to_string(data_row) + " has " +
                             std::to_string(tokens.size()) + " columns, expected " +
                             std::to_string(columns));
        std::vector<double> values(columns);
        for (std::size_t c = 0; c < columns; ++c)
            values[c] = parse_cell(tokens[c], data_row, c + 1);
        rows.push_back(std::move(values));
    }
    if (rows.size() < 2)
        throw SizeError("need at least 2 data rows, got " + std::to_string(rows.size()));

    Dataset ds;
    ds.name = path.stem().string();
    ds.features = Matrix(rows.size(), columns - 1);
    ds.targets.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j + 1 < columns; ++j) ds.features(i, j) = rows[i][j];
        ds.targets[i] = rows[i][columns - 1];
    }
    return ds;
}

namespace {

struct ColumnStats {
    double mean = 0.0;
    double sd = 1.0;
    bool constant = false;
};

ColumnStats column_stats(const std::vector<double>& values) {
    ColumnStats st;
    const double n = static_cast<double>(values.size());
    double lo = values.front(), hi = values.front();
    double sum = 0.0;
    for (double v : values) {
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    st.mean = sum / n;
    if (lo == hi) {
        st.constant = true;
        return st;
    }
    double ss = 0.0;
    for (double v : values) {
        const double c = v - st.mean;
        ss += c * c;
    }
    st.sd = std::sqrt(ss / n);  // population convention
    if (st.sd == 0.0) st.constant = true;
    return st;
}

Dataset apply_standardize(const Dataset& ds, std::span<const std::size_t> stat_rows) {
    if (stat_rows.size() < 2) throw SizeError("standardize needs at least 2 rows");

    Dataset out = ds;
    std::vector<double> column(stat_rows.size());
    for (std::size_t j = 0; j <= ds.d(); ++j) {
        const bool is_target = j == ds.d();
        for (std::size_t i = 0; i < stat_rows.size(); ++i)
            column[i] = is_target ? ds.targets[stat_rows[i]] : ds.features(stat_rows[i], j);
        const ColumnStats st = column_stats(column);
        for (std::size_t i = 0; i < ds.n(); ++i) {
            const double v = is_target ? ds.targets[i] : ds.features(i, j);
            const double z = st.constant ? 0.0 : (v - st.mean) / st.sd;
            if (is_target)
                out.targets[i] = z;
            else
                out.features(i, j) = z;
        }
    }
    return out;
}

}  // namespace

Dataset standardize(const Dataset& ds) {
    std::vector<std::size_t> all(ds.n());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return apply_standardize(ds, all);
}

Dataset standardize_with(const Dataset& ds, std::span<const std::size_t> stat_rows) {
    return apply_standardize(ds, stat_rows);
}

void to_json(nlohmann::json& j, const Realisation& r) {
    j = nlohmann::json{{"train_indices", r.train_indices},
                       {"test_indices", r.test_indices},
                       {"seed", r.seed}};
}

void from_json(const nlohmann::json& j, Realisation& r) {
    j.at("train_indices").get_to(r.train_indices);
    j.at("test_indices").get_to(r.test_indices);
    j.at("seed").get_to(r.seed);
}

nlohmann::json realisation_manifest(const std::string& dataset_name,
                                    std::span<const Realisation> realisations) {
    nlohmann::json splits = nlohmann::json::array();
    for (const Realisation& r : realisations) splits.push_back(r);
    return nlohmann::json{{"dataset", dataset_name}, {"realisations", std::move(splits)}};
}

std::vector<Realisation> realisations_from_manifest(const nlohmann::json& manifest,
                                                    std::string* dataset_name) {
    if (dataset_name) *dataset_name = manifest.at("dataset").get<std::string>();
    std::vector<Realisation> out;
    for (const auto& j : manifest.at("realisations")) out.push_back(j.get<Realisation>());
    return out;
}

std::vector<Realisation> make_realisations(const Dataset& ds, std::size_t count,
                                           double learn_fraction, std::uint64_t seed) {
    if (count < 1) throw ConfigError("realisation count must be >= 1");
    if (!(learn_fraction > 0.0 && learn_fraction < 1.0))
        throw ConfigError("learn_fraction must lie in (0, 1)");

    const std::size_t n = ds.n();
    const auto train_size =
        static_cast<std::size_t>(std::llround(learn_fraction * static_cast<double>(n)));
    if (train_size == 0 || train_size >= n)
        throw SizeError("learn_fraction " + std::to_string(learn_fraction) +
                        " yields an empty train or test set for n = " + std::to_string(n));

    std::vector<Realisation> out;
    out.reserve(count);
    for (std::size_t r = 0; r < count; ++r) {
        const std::uint64_t child = derive_seed(seed, seed_stream::realisation, r);
        SplitMix64 rng(child);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);

        Realisation real;
        real.seed = child;
        real.train_indices.assign(order.begin(), order.begin() + train_size);
        real.test_indices.assign(order.begin() + train_size, order.end());
        std::sort(real.train_indices.begin(), real.train_indices.end());
        std::sort(real.test_indices.begin(), real.test_indices.end());
        out.push_back(std::move(real));
    }
    return out;
}

Subsample make_subsample(const Realisation& r, std::size_t m, std::uint64_t seed) {
    if (m == 0) throw SizeError("subsample size must be >= 1");
    if (m > r.train_indices.size())
        throw SizeError("subsample size " + std::to_string(m) + " exceeds train size " +
                        std::to_string(r.train_indices.size()));

    SplitMix64 rng(seed);
    std::vector<std::size_t> pool = r.train_indices;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    Subsample s;
    s.seed = seed;
    s.indices.assign(pool.begin(), pool.begin() + m);
    std::sort(s.indices.begin(), s.indices.end());
    return s;
}

FoldPartition partition_folds(const Subsample& s, std::size_t fold_count, std::uint64_t seed) {
    const std::size_t m = s.m();
    if (fold_count < 2)
        throw ConfigError("fold count must be >= 2, got " + std::to_string(fold_count));
    if (fold_count > m)
        throw ConfigError("fold count " + std::to_string(fold_count) +
                          " exceeds subsample size " + std::to_string(m));

    SplitMix64 rng(seed);
    std::vector<std::size_t> order = s.indices;
    rng.shuffle(order);

    FoldPartition partition;
    partition.blocks.resize(fold_count);
    const std::size_t base = m / fold_count;
    const std::size_t extra = m % fold_count;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < fold_count; ++b) {
        const std::size_t len = base + (b < extra ? 1 : 0);
        partition.blocks[b].assign(order.begin() + pos, order.begin() + pos + len);
        std::sort(partition.blocks[b].begin(), partition.blocks[b].end());
        pos += len;
    }
    return partition;
}

}  // namespace vfpen
