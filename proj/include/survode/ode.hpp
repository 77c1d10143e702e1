#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace survode::ode {

// Largest state dimension handled with stack buffers. The hazard systems use
// 3 (logistic: h, H would be 2; hazard-response: h, q, H).
inline constexpr int kMaxDim = 8;

struct Tolerances {
  double rtol = 1e-8;
  double atol = 1e-10;
};

struct Options {
  Tolerances tol{};
  std::int64_t max_steps = 100000;  // accepted steps per solve
  double min_step_frac = 1e-14;     // step floor as a fraction of t_end
};

// Autonomous system: dydt depends on y only. For hazard systems the last
// component is the cumulative hazard and its derivative is the first
// component (H' = h) by construction of the right-hand side.
struct OdeSystem {
  int dimension = 0;
  std::function<void(const double* y, double* dydt)> rhs;
};

enum class FailReason { none, non_finite, max_steps, step_underflow };

struct Status {
  bool ok = true;
  FailReason reason = FailReason::none;
  double fail_time = 0.0;
};

namespace detail {
struct TrajectoryBuilder;
}

// Piecewise-quartic dense output over the accepted steps. Immutable once
// built; safe to share across threads.
class Trajectory {
 public:
  Trajectory() = default;

  int dimension() const { return dim_; }
  double t_end() const { return knots_.empty() ? 0.0 : knots_.back(); }
  const std::vector<double>& knots() const { return knots_; }
  // State stored at knot index i.
  const double* knot_state(std::size_t i) const { return &states_[i * dim_]; }

  // Interpolated state at t in [0, t_end]. Knot times reproduce the stored
  // state exactly. Throws std::out_of_range outside the integrated range.
  void evaluate_at(double t, double* out) const;
  std::vector<double> evaluate_at(double t) const;

  // Convenience accessors for hazard systems.
  double hazard_at(double t) const;
  double cumhaz_at(double t) const;

 private:
  friend struct detail::TrajectoryBuilder;
  int dim_ = 0;
  std::vector<double> knots_;   // step endpoints, starting at 0
  std::vector<double> states_;  // knots x dim
  std::vector<double> rcont_;   // (knots-1) x 5 x dim interpolation coefficients
};

struct IntegrateResult {
  Status status;
  Trajectory trajectory;
  bool ok() const { return status.ok; }
};

// Endpoint-only solve: writes the state at t_end into y_end. No storage.
Status integrate_to(const OdeSystem& system, const double* y0, double t_end,
                    const Options& opts, double* y_end);

// Full solve with dense output.
IntegrateResult integrate(const OdeSystem& system, const std::vector<double>& y0,
                          double t_end, const Options& opts = {});

namespace detail {

// Dormand-Prince 5(4) coefficients (Hairer, Norsett & Wanner).
inline constexpr double a21 = 0.2;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                        a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                        a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                        a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense-output coefficients.
inline constexpr double d1 = -12715105075.0 / 11282082432.0;
inline constexpr double d3 = 87487479700.0 / 32700410799.0;
inline constexpr double d4 = -10690763975.0 / 1880347072.0;
inline constexpr double d5 = 701980252875.0 / 199316789632.0;
inline constexpr double d6 = -1453857185.0 / 822651844.0;
inline constexpr double d7 = 69997945.0 / 29380423.0;

struct NullSink {
  static constexpr bool wants_dense = false;
  void start(int, const double*) {}
  void step(double, double, double, const double*, const double*, const double* const*) {}
};

// Collects knots, states and interpolation coefficients into a Trajectory.
struct TrajectoryBuilder {
  static constexpr bool wants_dense = true;
  Trajectory traj;
  void start(int dim, const double* y0) {
    traj.dim_ = dim;
    traj.knots_.push_back(0.0);
    traj.states_.insert(traj.states_.end(), y0, y0 + dim);
  }
  // Called after each accepted step from t with size h; y is the left state,
  // ynew the right state at tnew, k the seven stage derivatives.
  void step(double t, double h, double tnew, const double* y, const double* ynew,
            const double* const* k) {
    (void)t;
    const int dim = traj.dim_;
    traj.knots_.push_back(tnew);
    traj.states_.insert(traj.states_.end(), ynew, ynew + dim);
    const std::size_t base = traj.rcont_.size();
    traj.rcont_.resize(base + 5 * static_cast<std::size_t>(dim));
    double* rc = &traj.rcont_[base];
    for (int i = 0; i < dim; ++i) {
      const double ydiff = ynew[i] - y[i];
      const double bspl = h * k[0][i] - ydiff;
      rc[i] = y[i];
      rc[dim + i] = ydiff;
      rc[2 * dim + i] = bspl;
      rc[3 * dim + i] = ydiff - h * k[6][i] - bspl;
      rc[4 * dim + i] = h * (d1 * k[0][i] + d3 * k[2][i] + d4 * k[3][i] +
                             d5 * k[4][i] + d6 * k[5][i] + d7 * k[6][i]);
    }
  }
};

template <class Rhs>
double initial_step(Rhs&& rhs, int dim, const double* y0, const double* f0,
                    double t_end, const Tolerances& tol) {
  double d0 = 0.0, d1n = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double sc = tol.atol + tol.rtol * std::abs(y0[i]);
    d0 += (y0[i] / sc) * (y0[i] / sc);
    d1n += (f0[i] / sc) * (f0[i] / sc);
  }
  d0 = std::sqrt(d0 / dim);
  d1n = std::sqrt(d1n / dim);
  double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
  h0 = std::min(h0, t_end);
  double y1[kMaxDim], f1[kMaxDim];
  for (int i = 0; i < dim; ++i) y1[i] = y0[i] + h0 * f0[i];
  rhs(y1, f1);
  double d2 = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double sc = tol.atol + tol.rtol * std::abs(y0[i]);
    const double df = (f1[i] - f0[i]) / sc;
    d2 += df * df;
  }
  d2 = std::sqrt(d2 / dim) / h0;
  const double dm = std::max(d1n, d2);
  double h1 = (dm <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
  return std::min({100.0 * h0, h1, t_end});
}

// Core driver, templated so concrete right-hand sides inline fully.
template <class Rhs, class Sink>
Status dopri5(Rhs&& rhs, int dim, const double* y0, double t_end,
              const Options& opts, Sink&& sink, double* y_end) {
  Status st;
  double y[kMaxDim], ynew[kMaxDim], ytmp[kMaxDim];
  double k1[kMaxDim], k2[kMaxDim], k3[kMaxDim], k4[kMaxDim], k5[kMaxDim],
      k6[kMaxDim], k7[kMaxDim];
  for (int i = 0; i < dim; ++i) y[i] = y0[i];

  sink.start(dim, y);
  if (t_end <= 0.0) {
    for (int i = 0; i < dim; ++i) y_end[i] = y[i];
    return st;
  }

  rhs(y, k1);
  for (int i = 0; i < dim; ++i) {
    if (!std::isfinite(k1[i])) return {false, FailReason::non_finite, 0.0};
  }

  const double hmin = opts.min_step_frac * t_end;
  double h = initial_step(rhs, dim, y, k1, t_end, opts.tol);
  if (!(h > 0.0) || !std::isfinite(h)) h = hmin > 0 ? 1e3 * hmin : 1e-6;
  double t = 0.0;
  double facold = 1e-4;
  constexpr double safe = 0.9, beta = 0.04;
  constexpr double expo1 = 0.2 - beta * 0.75;
  constexpr double facc1 = 5.0, facc2 = 0.1;  // 1/min-factor, 1/max-factor
  std::int64_t accepted = 0;

  while (t < t_end) {
    bool last = false;
    if (t + 1.0001 * h >= t_end) {
      h = t_end - t;
      last = true;
    }
    if (h < hmin) return {false, FailReason::step_underflow, t};

    for (int i = 0; i < dim; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
    rhs(ytmp, k2);
    for (int i = 0; i < dim; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(ytmp, k3);
    for (int i = 0; i < dim; ++i)
      ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(ytmp, k4);
    for (int i = 0; i < dim; ++i)
      ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(ytmp, k5);
    for (int i = 0; i < dim; ++i)
      ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                            a65 * k5[i]);
    rhs(ytmp, k6);
    for (int i = 0; i < dim; ++i)
      ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                            a76 * k6[i]);
    rhs(ynew, k7);

    double err = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double sc =
          opts.tol.atol + opts.tol.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                            e6 * k6[i] + e7 * k7[i]);
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / dim);

    if (!std::isfinite(err)) {
      // Overflow in a trial step: retry smaller; persistent failure hits the
      // step floor and is reported as non_finite at the current time.
      h *= 0.25;
      if (h < hmin) return {false, FailReason::non_finite, t};
      continue;
    }

    if (err <= 1.0) {
      const double tnew = last ? t_end : t + h;
      if constexpr (std::remove_reference_t<Sink>::wants_dense) {
        const double* ks[7] = {k1, k2, k3, k4, k5, k6, k7};
        sink.step(t, h, tnew, y, ynew, ks);
      } else {
        sink.step(t, h, tnew, y, ynew, nullptr);
      }
      t = tnew;
      for (int i = 0; i < dim; ++i) {
        y[i] = ynew[i];
        k1[i] = k7[i];  // FSAL
      }
      if (++accepted > opts.max_steps) return {false, FailReason::max_steps, t};
      double fac = std::pow(err, expo1) / std::pow(facold, beta);
      fac = std::max(facc2, std::min(facc1, fac / safe));
      facold = std::max(err, 1e-4);
      h = h / fac;
    } else {
      const double fac11 = std::pow(err, 0.2);
      h = h / std::min(facc1, fac11 / safe);
    }
  }

  for (int i = 0; i < dim; ++i) y_end[i] = y[i];
  return st;
}

}  // namespace detail

// Endpoint-only solve for a concrete (inlineable) right-hand side.
template <class Rhs>
Status solve_to(Rhs&& rhs, int dim, const double* y0, double t_end,
                const Options& opts, double* y_end) {
  return detail::dopri5(rhs, dim, y0, t_end, opts, detail::NullSink{}, y_end);
}

}  // namespace survode::ode
