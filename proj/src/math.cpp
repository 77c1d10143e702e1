#include "survode/math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace survode {

double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.9189385332046727;  // log sqrt(2*pi)
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double gamma_logpdf(double x, double shape, double rate) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double logistic(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double quantile_type7(std::vector<double> sample, double p) {
  if (sample.empty()) throw std::invalid_argument("quantile of empty sample");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile level outside [0,1]");
  std::sort(sample.begin(), sample.end());
  const std::size_t n = sample.size();
  if (n == 1) return sample[0];
  const double h = (static_cast<double>(n) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sample[lo] + frac * (sample[hi] - sample[lo]);
}

double sample_mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_sd(const std::vector<double>& x) {
  const double m = sample_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double silverman_bandwidth(const std::vector<double>& x) {
  const double sd = sample_sd(x);
  std::vector<double> copy = x;
  const double q1 = quantile_type7(copy, 0.25);
  const double q3 = quantile_type7(copy, 0.75);
  const double iqr = q3 - q1;
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) throw std::invalid_argument("bandwidth undefined for zero-variance sample");
  return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

namespace {

// Kronrod 15 nodes/weights on [-1,1] and embedded Gauss-7 weights.
constexpr double kKronrodNode[15] = {
    -0.991455371120813, -0.949107912342759, -0.864864423359769, -0.741531185599394,
    -0.586087235467691, -0.405845151377397, -0.207784955007898, 0.0,
    0.207784955007898,  0.405845151377397,  0.586087235467691,  0.741531185599394,
    0.864864423359769,  0.949107912342759,  0.991455371120813};
constexpr double kKronrodWeight[15] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529};
constexpr double kGaussWeight[7] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469,
    0.381830050505119, 0.279705391489277, 0.129484966168870};

struct GkResult {
  double value;
  double error;
};

GkResult gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double kron = 0.0, gauss = 0.0;
  for (int i = 0; i < 15; ++i) {
    const double fx = f(c + half * kKronrodNode[i]);
    kron += kKronrodWeight[i] * fx;
    if (i % 2 == 1) gauss += kGaussWeight[i / 2] * fx;
  }
  kron *= half;
  gauss *= half;
  return {kron, std::abs(kron - gauss)};
}

double gk_adaptive(const std::function<double(double)>& f, double a, double b,
                   double abs_tol, double rel_tol, int depth, int max_depth) {
  const GkResult r = gk15(f, a, b);
  if (depth >= max_depth) return r.value;
  if (r.error <= abs_tol || r.error <= rel_tol * std::abs(r.value)) return r.value;
  const double c = 0.5 * (a + b);
  return gk_adaptive(f, a, c, 0.5 * abs_tol, rel_tol, depth + 1, max_depth) +
         gk_adaptive(f, c, b, 0.5 * abs_tol, rel_tol, depth + 1, max_depth);
}

}  // namespace

double gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                     double abs_tol, double rel_tol, int max_depth) {
  if (!(b > a)) return 0.0;
  return gk_adaptive(f, a, b, abs_tol, rel_tol, 0, max_depth);
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max(d, std::abs(F - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - F));
  }
  return d;
}

double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  // advance through ties in both samples before comparing the EDFs
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace survode
