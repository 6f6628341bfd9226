#pragma once

#include <cstddef>
#include <span>

namespace vfpen {

double mean(std::span<const double> v);
// Sample standard deviation (n-1 denominator); 0 when fewer than two values.
double sample_sd(std::span<const double> v);

// I_x(a, b) by Lentz continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, double dof);

struct TTest {
    double t = 0.0;
    double p = 1.0;
    bool degenerate = false;  // zero-variance differences with nonzero mean
};

// Two-sided paired t-test with n-1 degrees of freedom. All-zero differences
// give t = 0, p = 1; zero variance with nonzero mean gives p = 0, flagged.
TTest paired_t_test(std::span<const double> a, std::span<const double> b);

double mean_absolute_error(std::span<const double> predictions,
                           std::span<const double> targets);

}  // namespace vfpen
