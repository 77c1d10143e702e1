// Times the OpenMP log-likelihood kernel against the serial reference on a
// synthetic hazard-response dataset and checks they agree bit for bit.
//
//   bench_likelihood [n] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <omp.h>

#include "survode/likelihood.hpp"
#include "survode/simulate.hpp"

using namespace survode;

namespace {

double time_once(const std::function<double()>& fn, int repeats, double* value) {
  using clock = std::chrono::steady_clock;
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clock::now();
    *value = fn();
    const auto t1 = clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 2000;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;

  const Scenario sc = generate_scenario(n, 0.2, 20260810);
  const ModelSpec spec = scenario_spec();
  const ParamLayout layout = ParamLayout::make_full(spec);
  const Eigen::VectorXd eta = scenario_truth();

  double serial_val = 0.0, parallel_val = 0.0;
  const double t_serial = time_once(
      [&] { return log_likelihood_serial(sc.data, spec, layout, eta); }, repeats,
      &serial_val);

  std::printf("hazard-response log-likelihood, n=%d (best of %d)\n", n, repeats);
  std::printf("  serial reference : %8.2f ms   value %.12f\n", 1e3 * t_serial, serial_val);

  const int max_threads = omp_get_max_threads();
  for (int t = 1; t <= max_threads; t *= 2) {
    omp_set_num_threads(t);
    const double t_par = time_once(
        [&] { return log_likelihood(sc.data, spec, layout, eta); }, repeats, &parallel_val);
    const bool identical = parallel_val == serial_val;
    std::printf("  openmp %d thread%s : %8.2f ms   speedup %5.2fx   bit-identical: %s\n", t,
                t == 1 ? " " : "s", 1e3 * t_par, t_serial / t_par, identical ? "yes" : "NO");
    if (!identical) return 1;
  }
  return 0;
}
