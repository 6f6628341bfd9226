#include "vfpen/stats.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "vfpen/errors.hpp"

namespace vfpen {

double mean(std::span<const double> v) {
    double acc = 0.0;
    for (const double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (const double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

namespace {

// Lentz continued fraction for the incomplete beta (Numerical Recipes betacf).
double beta_cf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(dof / 2.0, 0.5, x);
    return t > 0 ? 1.0 - tail : tail;
}

TTest paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ShapeError("paired_t_test needs equal lengths, got " +
                         std::to_string(a.size()) + " and " + std::to_string(b.size()));
    if (a.size() < 2) throw SizeError("paired_t_test needs at least 2 pairs");

    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    const double m = mean(diff);
    const double sd = sample_sd(diff);
    const double n = static_cast<double>(diff.size());

    TTest out;
    if (sd == 0.0) {
        if (m == 0.0) return out;  // t = 0, p = 1 by convention
        out.t = m > 0 ? std::numeric_limits<double>::infinity()
                      : -std::numeric_limits<double>::infinity();
        out.p = 0.0;
        out.degenerate = true;
        return out;
    }
    out.t = m / (sd / std::sqrt(n));
    const double dof = n - 1.0;
    out.p = regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + out.t * out.t));
    return out;
}

double mean_absolute_error(std::span<const double> predictions,
                           std::span<const double> targets) {
    if (predictions.size() != targets.size())
        throw ShapeError("mean_absolute_error needs equal lengths, got " +
                         std::to_string(predictions.size()) + " and " +
                         std::to_string(targets.size()));
    if (predictions.empty()) throw SizeError("mean_absolute_error needs at least one value");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        acc += std::abs(predictions[i] - targets[i]);
    return acc / static_cast<double>(predictions.size());
}

}  // namespace vfpen
