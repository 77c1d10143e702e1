#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace survode {

// --- seeding ---------------------------------------------------------------

// SplitMix64 step; used to derive independent substreams from (seed, index)
// so parallel row simulation is independent of thread count.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ stream));
}

// --- densities -------------------------------------------------------------

double normal_logpdf(double x, double mean, double sd);
double normal_cdf(double x);
// log Gamma(shape, rate) density at x > 0
double gamma_logpdf(double x, double shape, double rate);

// Numerically stable 1/(1+exp(-x)); handles +-inf.
double logistic(double x);

// --- sample statistics -----------------------------------------------------

// Linear-interpolation (type-7) quantile of an unsorted sample.
double quantile_type7(std::vector<double> sample, double p);

double sample_mean(const std::vector<double>& x);
double sample_sd(const std::vector<double>& x);

// Silverman's rule: 0.9 * min(sd, IQR/1.34) * n^(-1/5).
double silverman_bandwidth(const std::vector<double>& x);

// --- quadrature ------------------------------------------------------------

// Adaptive Gauss-Kronrod (G7,K15) on [a, b].
double gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                     double abs_tol = 1e-8, double rel_tol = 1e-8, int max_depth = 50);

// --- goodness of fit -------------------------------------------------------

// Kolmogorov-Smirnov statistic of a sample against a cdf.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);
// Two-sample KS statistic.
double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace survode
