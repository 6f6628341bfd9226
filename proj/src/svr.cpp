#include "vfpen/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vfpen/errors.hpp"

namespace vfpen {

double rbf_kernel(std::span<const double> u, std::span<const double> v, double gamma) {
    if (u.size() != v.size())
        throw ShapeError("rbf_kernel dimension mismatch: " + std::to_string(u.size()) +
                         " vs " + std::to_string(v.size()));
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    double d2 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double diff = u[i] - v[i];
        d2 += diff * diff;
    }
    return std::exp(-gamma * d2);
}

Matrix squared_distances(const Matrix& x) {
    const std::size_t n = x.rows();
    Matrix d2(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < x.cols(); ++k) {
                const double diff = x(i, k) - x(j, k);
                acc += diff * diff;
            }
            d2(i, j) = acc;
            d2(j, i) = acc;
        }
    }
    return d2;
}

Matrix gram_from_distances(const Matrix& d2, double gamma) {
    Matrix gram(d2.rows(), d2.cols());
    for (std::size_t i = 0; i < d2.rows(); ++i)
        for (std::size_t j = 0; j < d2.cols(); ++j) gram(i, j) = std::exp(-gamma * d2(i, j));
    return gram;
}

namespace {

void validate_params(const SvrParams& p) {
    if (!(p.cost > 0.0)) throw ConfigError("SVR cost must be positive");
    if (!(p.gamma > 0.0)) throw ConfigError("SVR gamma must be positive");
    if (p.epsilon < 0.0) throw ConfigError("SVR epsilon must be non-negative");
}

// Dual state over 2n variables a_k with signs z_k (+1 for alpha, -1 for
// alpha*), minimising (1/2) a'Qa + p'a under sum(z_k a_k) = 0, 0 <= a_k <= C,
// with Q_kl = z_k z_l K_kl and p = (eps - y, eps + y). beta_i = a_i - a_{n+i}.
struct DualState {
    std::vector<double> a;
    std::vector<double> g;  // gradient Qa + p
    std::size_t n = 0;
};

double dual_objective_min_form(const DualState& st, const Matrix& gram,
                               std::span<const double> y, double eps) {
    std::vector<double> beta(st.n);
    for (std::size_t i = 0; i < st.n; ++i) beta[i] = st.a[i] - st.a[st.n + i];
    double quad = 0.0;
    for (std::size_t i = 0; i < st.n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < st.n; ++j) acc += gram(i, j) * beta[j];
        quad += beta[i] * acc;
    }
    double lin = 0.0;
    for (std::size_t i = 0; i < st.n; ++i) {
        lin += eps * (st.a[i] + st.a[st.n + i]);
        lin -= y[i] * beta[i];
    }
    return 0.5 * quad + lin;
}

}  // namespace

SvrModel fit_svr_prepared(const Matrix& x, std::span<const double> y, const Matrix& gram,
                          const SvrParams& params, double tol, std::size_t max_passes,
                          std::vector<double>* objective_trace) {
    validate_params(params);
    const std::size_t n = x.rows();
    if (n == 0) throw SizeError("fit_svr needs at least one sample");
    if (y.size() != n)
        throw ShapeError("fit_svr: " + std::to_string(n) + " rows vs " +
                         std::to_string(y.size()) + " targets");

    const double c = params.cost;
    const double eps = params.epsilon;
    if (max_passes == 0) max_passes = 10 * n;
    const std::size_t max_updates = max_passes * n;

    DualState st;
    st.n = n;
    st.a.assign(2 * n, 0.0);
    st.g.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        st.g[i] = eps - y[i];
        st.g[n + i] = eps + y[i];
    }

    const auto z = [n](std::size_t k) { return k < n ? 1.0 : -1.0; };

    double gap = 0.0;
    bool converged = false;
    std::size_t updates = 0;
    while (updates < max_updates) {
        // Maximal violating pair: i from I_up, j from I_low.
        double up_best = -std::numeric_limits<double>::infinity();
        double low_best = std::numeric_limits<double>::infinity();
        std::size_t i = 2 * n, j = 2 * n;
        for (std::size_t k = 0; k < 2 * n; ++k) {
            const double zk = z(k);
            const double score = -zk * st.g[k];
            const bool in_up = zk > 0 ? st.a[k] < c : st.a[k] > 0;
            const bool in_low = zk > 0 ? st.a[k] > 0 : st.a[k] < c;
            if (in_up && score > up_best) {
                up_best = score;
                i = k;
            }
            if (in_low && score < low_best) {
                low_best = score;
                j = k;
            }
        }
        if (i == 2 * n || j == 2 * n) {
            converged = true;
            gap = 0.0;
            break;
        }
        gap = up_best - low_best;
        if (gap < tol) {
            converged = true;
            break;
        }

        // Move a_i by +t along z_i and a_j by -t along z_j; sum(z_k a_k) is
        // conserved and the objective decreases for t in (0, t_max].
        const std::size_t ri = i % n, rj = j % n;
        double eta = gram(ri, ri) + gram(rj, rj) - 2.0 * gram(ri, rj);
        eta = std::max(eta, 1e-12);
        const double slope = z(i) * st.g[i] - z(j) * st.g[j];  // negative here
        double t = -slope / eta;
        const double bound_i = z(i) > 0 ? c - st.a[i] : st.a[i];
        const double bound_j = z(j) > 0 ? st.a[j] : c - st.a[j];
        t = std::min(t, std::min(bound_i, bound_j));
        if (!(t > 0.0)) {
            converged = true;
            break;
        }
        st.a[i] = t == bound_i ? (z(i) > 0 ? c : 0.0) : st.a[i] + z(i) * t;
        st.a[j] = t == bound_j ? (z(j) > 0 ? 0.0 : c) : st.a[j] - z(j) * t;

        // G_l += Q_li * da_i + Q_lj * da_j collapses to z_l * t * (K_li - K_lj).
        for (std::size_t l = 0; l < n; ++l) {
            const double delta = t * (gram(l, ri) - gram(l, rj));
            st.g[l] += delta;
            st.g[n + l] -= delta;
        }
        ++updates;
        if (objective_trace)
            objective_trace->push_back(-dual_objective_min_form(st, gram, y, eps));
    }

    std::vector<double> beta(n);
    for (std::size_t i = 0; i < n; ++i) beta[i] = st.a[i] - st.a[n + i];

    std::vector<double> expansion(n, 0.0);  // sum_j beta_j K_ij
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j2 = 0; j2 < n; ++j2) acc += beta[j2] * gram(i, j2);
        expansion[i] = acc;
    }

    // Bias: mean implied value over free points; otherwise the midpoint of the
    // feasible interval built from the zero and bound points.
    const double at_bound = 1e-9 * c;
    double bias_sum = 0.0;
    std::size_t free_count = 0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double b = beta[i];
        if (std::abs(b) > at_bound && std::abs(b) < c - at_bound) {
            bias_sum += y[i] - expansion[i] - eps * (b > 0 ? 1.0 : -1.0);
            ++free_count;
        } else if (std::abs(b) <= at_bound) {
            lo = std::max(lo, y[i] - expansion[i] - eps);
            hi = std::min(hi, y[i] - expansion[i] + eps);
        } else if (b > 0) {
            hi = std::min(hi, y[i] - expansion[i] - eps);
        } else {
            lo = std::max(lo, y[i] - expansion[i] + eps);
        }
    }
    double bias = 0.0;
    if (free_count > 0)
        bias = bias_sum / static_cast<double>(free_count);
    else if (std::isfinite(lo) && std::isfinite(hi))
        bias = (lo + hi) / 2.0;
    else if (std::isfinite(hi))
        bias = hi;
    else if (std::isfinite(lo))
        bias = lo;

    // Retained support vectors: coefficients above the numerical floor.
    const double sv_floor = 1e-10 * c;
    std::vector<std::size_t> sv_rows;
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(beta[i]) > sv_floor) sv_rows.push_back(i);

    SvrModel model;
    model.gamma = params.gamma;
    model.epsilon = eps;
    model.cost = c;
    model.bias = bias;
    model.converged = converged;
    model.kkt_gap = gap;
    model.updates = updates;
    model.support_inputs = x.take_rows(sv_rows);
    model.support_rows = sv_rows;
    model.beta.reserve(sv_rows.size());
    double norm2 = 0.0;
    for (const std::size_t i : sv_rows) {
        model.beta.push_back(beta[i]);
        for (const std::size_t j2 : sv_rows) norm2 += beta[i] * beta[j2] * gram(i, j2);
    }
    model.weight_norm = std::sqrt(std::max(0.0, norm2));
    return model;
}

SvrModel fit_svr(const Matrix& x, std::span<const double> y, const SvrParams& params,
                 double tol, std::size_t max_passes, std::vector<double>* objective_trace) {
    validate_params(params);
    const Matrix gram = gram_from_distances(squared_distances(x), params.gamma);
    return fit_svr_prepared(x, y, gram, params, tol, max_passes, objective_trace);
}

double predict_svr(const SvrModel& model, std::span<const double> x) {
    if (!model.beta.empty() && x.size() != model.support_inputs.cols())
        throw ShapeError("predict_svr expected " +
                         std::to_string(model.support_inputs.cols()) + " features, got " +
                         std::to_string(x.size()));
    double acc = model.bias;
    for (std::size_t i = 0; i < model.beta.size(); ++i)
        acc += model.beta[i] * rbf_kernel(model.support_inputs.row(i), x, model.gamma);
    return acc;
}

double weight_norm(const SvrModel& model) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < model.beta.size(); ++i)
        for (std::size_t j = 0; j < model.beta.size(); ++j)
            norm2 += model.beta[i] * model.beta[j] *
                     rbf_kernel(model.support_inputs.row(i), model.support_inputs.row(j),
                                model.gamma);
    return std::sqrt(std::max(0.0, norm2));
}

SvrSlacks svr_slacks(const SvrModel& model, const Matrix& x, std::span<const double> y) {
    SvrSlacks out;
    out.xi.resize(x.rows());
    out.xi_star.resize(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double f = predict_svr(model, x.row(i));
        out.xi[i] = std::max(0.0, (y[i] - f) - model.epsilon);
        out.xi_star[i] = std::max(0.0, (f - y[i]) - model.epsilon);
    }
    return out;
}

double svr_primal_objective(const SvrModel& model, const Matrix& x, std::span<const double> y) {
    const SvrSlacks slacks = svr_slacks(model, x, y);
    double penalty = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) penalty += slacks.xi[i] + slacks.xi_star[i];
    const double norm = weight_norm(model);
    return 0.5 * norm * norm + model.cost * penalty;
}

double svr_dual_objective(const Matrix& gram, std::span<const double> beta,
                          std::span<const double> y, double epsilon) {
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < beta.size(); ++j) acc += gram(i, j) * beta[j];
        quad += beta[i] * acc;
        lin += y[i] * beta[i] - epsilon * std::abs(beta[i]);
    }
    return -0.5 * quad + lin;
}

nlohmann::json svr_to_json(const SvrModel& model) {
    std::vector<std::vector<double>> inputs(model.support_inputs.rows());
    for (std::size_t i = 0; i < model.support_inputs.rows(); ++i) {
        const auto row = model.support_inputs.row(i);
        inputs[i].assign(row.begin(), row.end());
    }
    return nlohmann::json{{"beta", model.beta},
                          {"bias", model.bias},
                          {"gamma", model.gamma},
                          {"epsilon", model.epsilon},
                          {"cost", model.cost},
                          {"weight_norm", model.weight_norm},
                          {"converged", model.converged},
                          {"support_rows", model.support_rows},
                          {"support_inputs", inputs}};
}

}  // namespace vfpen
