#pragma once

#include <cstddef>
#include <vector>

namespace mocha::stats {

// Regularized incomplete beta function I_x(a, b).
double incbeta(double a, double b, double x);

// Two-sided p-value for a Student-t statistic with df degrees of freedom.
double t_two_sided_p(double t, double df);

struct PairedT {
  double mean_delta = 0.0;
  double t = 0.0;
  double p = 1.0;
  size_t n = 0;
  bool degenerate = false;  // zero-variance deltas, t reported as 0
};

// Paired t-test on deltas a[i] - b[i].
PairedT paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct Pearson {
  double r = 0.0;
  double p = 1.0;
  size_t n = 0;
  bool degenerate = false;  // a constant input, r reported as 0
};

Pearson pearson(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& v);

// Median with the midpoint convention for even counts.
double median(std::vector<double> v);

}  // namespace mocha::stats
