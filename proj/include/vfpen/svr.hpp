#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"
#include "vfpen/matrix.hpp"

namespace vfpen {

struct SvrParams {
    double cost = 1.0;     // C
    double gamma = 1.0;    // RBF kernel width
    double epsilon = 0.1;  // insensitivity radius (may be 0)
};

struct SvrModel {
    Matrix support_inputs;     // training rows with beta != 0
    std::vector<double> beta;  // alpha_i - alpha_i*, aligned with support_inputs
    std::vector<std::size_t> support_rows;  // positions in the training set
    double bias = 0.0;
    double gamma = 1.0;
    double epsilon = 0.0;
    double cost = 0.0;
    double weight_norm = 0.0;  // RKHS norm of the weight vector
    bool converged = true;
    double kkt_gap = 0.0;      // final maximal KKT violation
    std::size_t updates = 0;   // pair updates performed
};

// exp(-gamma * ||u - v||^2)
double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma);

// Pairwise squared euclidean distances between the rows of x.
Matrix squared_distances(const Matrix& x);
// exp(-gamma * d2) elementwise; reused across C and epsilon at fixed gamma.
Matrix gram_from_distances(const Matrix& d2, double gamma);

// SMO over the epsilon-SVR dual: maximal-violating-pair updates under
// sum(beta) = 0 and |beta_i| <= C. One pass is n pair updates; max_passes = 0
// selects the default of 10n passes. Hitting the cap records converged = false
// on the model instead of throwing. When objective_trace is given, the dual
// objective (maximisation form) is appended after every update.
SvrModel fit_svr(const Matrix& x, std::span<const double> y, const SvrParams& params,
                 double tol = 1e-3, std::size_t max_passes = 0,
                 std::vector<double>* objective_trace = nullptr);

// Same solver with a caller-supplied Gram matrix.
SvrModel fit_svr_prepared(const Matrix& x, std::span<const double> y, const Matrix& gram,
                          const SvrParams& params, double tol = 1e-3,
                          std::size_t max_passes = 0,
                          std::vector<double>* objective_trace = nullptr);

// sum_i beta_i * k(x_i, x) + b over the support vectors.
double predict_svr(const SvrModel& model, std::span<const double> x);

// sqrt(sum_ij beta_i beta_j k(x_i, x_j)), recomputed from the dual expansion.
double weight_norm(const SvrModel& model);

// Post-hoc slack diagnostics: xi = max(0, (y-f) - eps), xi* = max(0, (f-y) - eps).
struct SvrSlacks {
    std::vector<double> xi, xi_star;
};
SvrSlacks svr_slacks(const SvrModel& model, const Matrix& x, std::span<const double> y);

// 0.5 * ||w||^2 + C * sum(xi + xi*), at the model's own bias.
double svr_primal_objective(const SvrModel& model, const Matrix& x, std::span<const double> y);

// -(1/2) b'Kb - eps * sum|b| + y'b for an explicit coefficient vector.
double svr_dual_objective(const Matrix& gram, std::span<const double> beta,
                          std::span<const double> y, double epsilon);

nlohmann::json svr_to_json(const SvrModel& model);

}  // namespace vfpen
