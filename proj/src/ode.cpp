#include "survode/ode.hpp"

#include <algorithm>
#include <stdexcept>

namespace survode::ode {

void Trajectory::evaluate_at(double t, double* out) const {
  if (knots_.empty()) throw std::out_of_range("empty trajectory");
  if (t < 0.0 || t > knots_.back())
    throw std::out_of_range("time outside integrated range");
  // Exact reproduction at stored knots.
  auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
  if (it != knots_.end() && *it == t) {
    const std::size_t idx = static_cast<std::size_t>(it - knots_.begin());
    const double* s = knot_state(idx);
    std::copy(s, s + dim_, out);
    return;
  }
  const std::size_t seg = static_cast<std::size_t>(it - knots_.begin()) - 1;
  const double t0 = knots_[seg];
  const double h = knots_[seg + 1] - t0;
  const double theta = (t - t0) / h;
  const double* rc = &rcont_[seg * 5 * static_cast<std::size_t>(dim_)];
  for (int i = 0; i < dim_; ++i) {
    const double c1 = rc[i];
    const double c2 = rc[dim_ + i];
    const double c3 = rc[2 * dim_ + i];
    const double c4 = rc[3 * dim_ + i];
    const double c5 = rc[4 * dim_ + i];
    out[i] = c1 + theta * (c2 + (1.0 - theta) * (c3 + theta * (c4 + (1.0 - theta) * c5)));
  }
}

std::vector<double> Trajectory::evaluate_at(double t) const {
  std::vector<double> out(static_cast<std::size_t>(dim_));
  evaluate_at(t, out.data());
  return out;
}

double Trajectory::hazard_at(double t) const {
  double buf[kMaxDim];
  evaluate_at(t, buf);
  return buf[0];
}

double Trajectory::cumhaz_at(double t) const {
  double buf[kMaxDim];
  evaluate_at(t, buf);
  return buf[dim_ - 1];
}

Status integrate_to(const OdeSystem& system, const double* y0, double t_end,
                    const Options& opts, double* y_end) {
  return detail::dopri5(
      [&system](const double* y, double* dy) { system.rhs(y, dy); },
      system.dimension, y0, t_end, opts, detail::NullSink{}, y_end);
}

IntegrateResult integrate(const OdeSystem& system, const std::vector<double>& y0,
                          double t_end, const Options& opts) {
  if (static_cast<int>(y0.size()) != system.dimension)
    throw std::invalid_argument("initial state length does not match system dimension");
  if (system.dimension > kMaxDim)
    throw std::invalid_argument("system dimension exceeds kMaxDim");
  IntegrateResult res;
  detail::TrajectoryBuilder builder;
  double y_end[kMaxDim];
  res.status = detail::dopri5(
      [&system](const double* y, double* dy) { system.rhs(y, dy); },
      system.dimension, y0.data(), t_end, opts, builder, y_end);
  res.trajectory = std::move(builder.traj);
  return res;
}

}  // namespace survode::ode
