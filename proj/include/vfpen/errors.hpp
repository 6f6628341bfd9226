#pragma once

#include <stdexcept>

namespace vfpen {

// Input files that cannot be parsed (CSV, JSON configs).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Sample-count preconditions: empty splits, m larger than the train set, n too small.
struct SizeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Vector/matrix dimension mismatches.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid option values: fold counts, grids, config files.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Model selection could not produce a result (every grid point failed).
struct SelectionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Report/trace output failures.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A dataset name could not be resolved; the message carries fetch instructions.
struct DatasetResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace vfpen
