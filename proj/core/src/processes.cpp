#include "glab/processes.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "glab/errors.hpp"

namespace glab {

namespace {

constexpr double kTimeSlack = 1e-12;

void require_in_range(double t, double horizon) {
  if (!(t >= -kTimeSlack * horizon && t <= horizon * (1.0 + kTimeSlack))) {
    throw TimeOutOfRange("time " + std::to_string(t) + " outside [0, " +
                         std::to_string(horizon) + "]");
  }
}

}  // namespace

std::string_view to_string(ProcessKind kind) noexcept {
  return kind == ProcessKind::Vp ? "vp" : "ve";
}

ProcessKind parse_process_kind(std::string_view name) {
  if (name == "vp") return ProcessKind::Vp;
  if (name == "ve") return ProcessKind::Ve;
  throw InvalidSpec("unknown process '" + std::string(name) + "' (expected vp|ve)");
}

VpSchedule::VpSchedule(double beta_min, double beta_max, int steps)
    : beta_min_(beta_min), beta_max_(beta_max), steps_(steps) {
  if (steps <= 0) throw InvalidSpec("VP schedule needs a positive step count");
  if (!(beta_min > 0.0) || !(beta_max > 0.0)) {
    throw InvalidSpec("VP schedule needs beta_min, beta_max > 0");
  }
  dt_ = horizon() / steps;
  log_alpha_bar_.resize(static_cast<std::size_t>(steps) + 1);
  log_alpha_bar_[0] = 0.0;
  for (int k = 1; k <= steps; ++k) {
    const double factor = 1.0 - discrete_beta(k);
    if (!(factor > 0.0)) {
      throw InvalidSpec("VP schedule: beta*dt >= 1 at node " + std::to_string(k) +
                        "; use more steps");
    }
    log_alpha_bar_[k] = log_alpha_bar_[k - 1] + std::log(factor);
  }
}

double VpSchedule::beta(double t) const {
  require_in_range(t, horizon());
  return beta_min_ + t * (beta_max_ - beta_min_);
}

double VpSchedule::discrete_beta(int node) const {
  if (node < 0 || node > steps_) throw TimeOutOfRange("VP node index out of range");
  const double t = horizon() * node / steps_;
  return (beta_min_ + t * (beta_max_ - beta_min_)) * dt_;
}

double VpSchedule::alpha_bar_at(int node) const {
  if (node < 0 || node > steps_) throw TimeOutOfRange("VP node index out of range");
  return node == 0 ? 1.0 : std::exp(log_alpha_bar_[static_cast<std::size_t>(node)]);
}

double VpSchedule::alpha_bar(double t) const {
  require_in_range(t, horizon());
  const double pos = std::clamp(t / dt_, 0.0, static_cast<double>(steps_));
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) < 1e-9) return alpha_bar_at(static_cast<int>(nearest));
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  const double log_ab = (1.0 - frac) * log_alpha_bar_[lo] + frac * log_alpha_bar_[lo + 1];
  return std::exp(log_ab);
}

double VpSchedule::alpha_bar_continuous(double t) const {
  require_in_range(t, horizon());
  return std::exp(-(beta_min_ * t + 0.5 * (beta_max_ - beta_min_) * t * t));
}

VeProcess::VeProcess(double horizon) : horizon_(horizon) {
  if (!(horizon > 0.0)) throw InvalidSpec("VE horizon must be positive");
}

ForwardProcess ForwardProcess::make(const ProcessConfig& config, int steps) {
  if (config.kind == ProcessKind::Vp) {
    return VpSchedule(config.beta_min, config.beta_max, steps);
  }
  return VeProcess(config.ve_horizon);
}

ProcessKind ForwardProcess::kind() const noexcept {
  return std::holds_alternative<VpSchedule>(impl_) ? ProcessKind::Vp : ProcessKind::Ve;
}

double ForwardProcess::horizon() const noexcept {
  if (const auto* v = vp()) return v->horizon();
  return ve()->horizon();
}

void ForwardProcess::check_time(double t) const { require_in_range(t, horizon()); }

double ForwardProcess::signal_scale(double t) const {
  if (const auto* v = vp()) return std::sqrt(v->alpha_bar(t));
  check_time(t);
  return 1.0;
}

double ForwardProcess::noise_var(double t) const {
  if (const auto* v = vp()) return 1.0 - v->alpha_bar(t);
  check_time(t);
  return std::max(t, 0.0);
}

double ForwardProcess::diffusion_rate(double t) const {
  if (const auto* v = vp()) return v->beta(t);
  check_time(t);
  return 1.0;
}

double ForwardProcess::prior_variance() const noexcept {
  if (vp()) return 1.0;
  return ve()->horizon();
}

ProcessConfig ForwardProcess::config() const noexcept {
  ProcessConfig c;
  if (const auto* v = vp()) {
    c.kind = ProcessKind::Vp;
    c.beta_min = v->beta_min();
    c.beta_max = v->beta_max();
  } else {
    c.kind = ProcessKind::Ve;
    c.ve_horizon = ve()->horizon();
  }
  return c;
}

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
  if (steps <= 0) throw InvalidSpec("time grid needs a positive step count");
  if (!(horizon > 0.0)) throw InvalidSpec("time grid needs a positive horizon");
  dt_ = horizon / steps;
}

double TimeGrid::at(int k) const noexcept {
  if (k >= steps_) return horizon_;
  if (k <= 0) return 0.0;
  return horizon_ * k / steps_;
}

double TimeGrid::node(std::size_t i) const noexcept {
  return at(steps_ - static_cast<int>(i));
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = node(i);
  return out;
}

double prior_sample(const ForwardProcess& process, RandomStream& rng) {
  return std::sqrt(process.prior_variance()) * rng.normal();
}

}  // namespace glab
