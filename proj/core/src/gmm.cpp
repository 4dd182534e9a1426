#include "glab/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "glab/errors.hpp"

namespace glab {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;  // ln(2π)
constexpr double kResponsibilityFloor = -700.0;      // log of the e^-700 clamp
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double component_log_pdf(double x, double mean, double var) noexcept {
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var)) - 0.5 * d * d / var;
}

void validate(const std::vector<Component>& components) {
  if (components.empty()) throw InvalidModel("mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) {
      throw InvalidModel("mixture weights must be finite and non-negative");
    }
    if (!(c.var > 0.0) || !std::isfinite(c.var)) {
      throw InvalidModel("mixture variances must be finite and strictly positive");
    }
    if (!std::isfinite(c.mean)) throw InvalidModel("mixture means must be finite");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidModel("mixture weights sum to " + std::to_string(total) + ", not 1");
  }
}

}  // namespace

Gmm1D::Gmm1D(std::vector<Component> components) : components_(std::move(components)) {
  validate(components_);
  log_weights_.reserve(components_.size());
  for (const auto& c : components_) {
    log_weights_.push_back(c.weight > 0.0 ? std::log(c.weight) : kNegInf);
  }
}

Gmm1D Gmm1D::normalized(std::vector<Component> components) {
  double total = 0.0;
  for (const auto& c : components) total += c.weight;
  if (!(total > 0.0)) throw InvalidModel("mixture weights must have a positive sum");
  for (auto& c : components) c.weight /= total;
  // Division can leave the sum a few ulps away from 1; fold the residue into
  // the largest weight.
  double sum = 0.0;
  for (const auto& c : components) sum += c.weight;
  auto largest = std::max_element(components.begin(), components.end(),
                                  [](const Component& a, const Component& b) {
                                    return a.weight < b.weight;
                                  });
  largest->weight += 1.0 - sum;
  return Gmm1D(std::move(components));
}

Gmm1D Gmm1D::gaussian(double mean, double var) { return Gmm1D({{1.0, mean, var}}); }

double Gmm1D::mean() const noexcept {
  double m = 0.0;
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

double Gmm1D::variance() const noexcept {
  const double m = mean();
  double v = 0.0;
  for (const auto& c : components_) {
    const double d = c.mean - m;
    v += c.weight * (c.var + d * d);
  }
  return v;
}

std::pair<double, double> Gmm1D::span_sigmas(double k) const noexcept {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double max_sd = 0.0;
  for (const auto& c : components_) {
    lo = std::min(lo, c.mean);
    hi = std::max(hi, c.mean);
    max_sd = std::max(max_sd, std::sqrt(c.var));
  }
  return {lo - k * max_sd, hi + k * max_sd};
}

double Gmm1D::log_density(double x) const noexcept {
  if (components_.size() == 1) {
    return component_log_pdf(x, components_[0].mean, components_[0].var);
  }
  double peak = kNegInf;
  // Small fixed-size mixtures dominate; two passes avoid a heap buffer.
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (log_weights_[i] == kNegInf) continue;
    peak = std::max(peak, log_weights_[i] + component_log_pdf(x, components_[i].mean,
                                                               components_[i].var));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (log_weights_[i] == kNegInf) continue;
    acc += std::exp(log_weights_[i] +
                    component_log_pdf(x, components_[i].mean, components_[i].var) - peak);
  }
  return peak + std::log(acc);
}

double Gmm1D::density(double x) const noexcept { return std::exp(log_density(x)); }

double Gmm1D::score(double x) const noexcept { return transformed_score(x, 1.0, 0.0); }

double Gmm1D::transformed_score(double x, double scale, double added_var) const noexcept {
  const std::size_t n = components_.size();
  if (n == 1) {
    const auto& c = components_[0];
    return -(x - scale * c.mean) / (scale * scale * c.var + added_var);
  }
  constexpr std::size_t kStack = 32;
  double lp_stack[kStack];
  std::vector<double> lp_heap;
  double* lp = lp_stack;
  if (n > kStack) {
    lp_heap.resize(n);
    lp = lp_heap.data();
  }
  double peak = kNegInf;
  for (std::size_t i = 0; i < n; ++i) {
    if (log_weights_[i] == kNegInf) {
      lp[i] = kNegInf;
      continue;
    }
    const auto& c = components_[i];
    lp[i] = log_weights_[i] +
            component_log_pdf(x, scale * c.mean, scale * scale * c.var + added_var);
    peak = std::max(peak, lp[i]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lp[i] == kNegInf) continue;
    const auto& c = components_[i];
    const double v = scale * scale * c.var + added_var;
    const double r = std::exp(std::max(lp[i] - peak, kResponsibilityFloor));
    num += r * (x - scale * c.mean) / v;
    den += r;
  }
  return -num / den;
}

double Gmm1D::cdf(double x) const noexcept {
  double p = 0.0;
  for (const auto& c : components_) {
    p += c.weight * 0.5 * std::erfc(-(x - c.mean) / std::sqrt(2.0 * c.var));
  }
  return p;
}

double Gmm1D::sample(RandomStream& rng) const {
  std::size_t idx = 0;
  if (components_.size() > 1) {
    const double u = rng.uniform();
    double acc = 0.0;
    idx = components_.size() - 1;
    for (std::size_t i = 0; i < components_.size(); ++i) {
      acc += components_[i].weight;
      if (u < acc) {
        idx = i;
        break;
      }
    }
  }
  const auto& c = components_[idx];
  return c.mean + std::sqrt(c.var) * rng.normal();
}

double log_density(const Gmm1D& m, double x) noexcept { return m.log_density(x); }
double score(const Gmm1D& m, double x) noexcept { return m.score(x); }

Gmm1D noisy(const Gmm1D& m, double t, const ForwardProcess& process) {
  const double scale = process.signal_scale(t);
  const double added = process.noise_var(t);
  std::vector<Component> out(m.components().begin(), m.components().end());
  for (auto& c : out) {
    c.mean = scale * c.mean;
    c.var = scale * scale * c.var + added;
  }
  return Gmm1D(std::move(out));
}

namespace {

Gmm1D concatenate(const std::vector<ClassEntry>& classes) {
  std::vector<Component> all;
  for (const auto& entry : classes) {
    for (const auto& c : entry.conditional.components()) {
      all.push_back({entry.prior * c.weight, c.mean, c.var});
    }
  }
  return Gmm1D::normalized(std::move(all));
}

const std::vector<ClassEntry>& validated(const std::vector<ClassEntry>& classes) {
  if (classes.empty()) throw InvalidModel("conditional model needs at least one class");
  double total = 0.0;
  for (const auto& c : classes) {
    if (!(c.prior >= 0.0)) throw InvalidModel("class priors must be non-negative");
    total += c.prior;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidModel("class priors sum to " + std::to_string(total) + ", not 1");
  }
  return classes;
}

}  // namespace

ConditionalModel::ConditionalModel(std::vector<ClassEntry> classes,
                                   std::optional<Gmm1D> unconditional)
    : classes_(std::move(classes)),
      unconditional_(unconditional ? std::move(*unconditional) : concatenate(validated(classes_))),
      explicit_unconditional_(unconditional.has_value()) {
  validated(classes_);
}

const Gmm1D& ConditionalModel::conditional(std::size_t c) const {
  if (c >= classes_.size()) {
    throw UnknownClass("class " + std::to_string(c) + " not in model with " +
                       std::to_string(classes_.size()) + " classes");
  }
  return classes_[c].conditional;
}

double cfg_score(const ConditionalModel& model, double x, double t, std::size_t c, double gamma,
                 const ForwardProcess& process) {
  const Gmm1D& cond = model.conditional(c);
  const double scale = process.signal_scale(t);
  const double added = process.noise_var(t);
  const double s_c = cond.transformed_score(x, scale, added);
  if (gamma == 1.0) return s_c;
  const double s_u = model.unconditional().transformed_score(x, scale, added);
  if (gamma == 0.0) return s_u;
  return (1.0 - gamma) * s_u + gamma * s_c;
}

Gmm1D gamma_powered_gaussian(const Gmm1D& uncond, const Gmm1D& cond, double gamma) {
  if (!uncond.is_gaussian() || !cond.is_gaussian()) {
    throw InvalidModel("gamma_powered_gaussian needs single-component inputs");
  }
  if (gamma == 1.0) return cond;
  const auto& u = uncond.components()[0];
  const auto& c = cond.components()[0];
  const double precision = gamma / c.var + (1.0 - gamma) / u.var;
  if (!(precision > 0.0)) {
    throw NonNormalizable("gamma-powered Gaussian has non-positive precision " +
                          std::to_string(precision));
  }
  const double mean = (gamma * c.mean / c.var + (1.0 - gamma) * u.mean / u.var) / precision;
  return Gmm1D::gaussian(mean, 1.0 / precision);
}

GridSpec default_grid(const Gmm1D& a, const Gmm1D& b, std::size_t points) {
  const auto [alo, ahi] = a.span_sigmas(0.0);
  const auto [blo, bhi] = b.span_sigmas(0.0);
  double max_sd = 0.0;
  for (const auto* m : {&a, &b}) {
    for (const auto& c : m->components()) max_sd = std::max(max_sd, std::sqrt(c.var));
  }
  return {std::min(alo, blo) - 10.0 * max_sd, std::max(ahi, bhi) + 10.0 * max_sd, points};
}

GridDensity::GridDensity(GridSpec spec, std::vector<double> values) : values_(std::move(values)) {
  if (spec.points < 2 || !(spec.hi > spec.lo)) throw InvalidSpec("degenerate density grid");
  if (values_.size() != spec.points) throw InvalidSpec("grid/value size mismatch");
  cell_width_ = (spec.hi - spec.lo) / static_cast<double>(spec.points - 1);
  grid_.resize(spec.points);
  for (std::size_t i = 0; i < spec.points; ++i) {
    grid_[i] = spec.lo + cell_width_ * static_cast<double>(i);
  }
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw NonNormalizable("grid density has invalid values");
  }
  const double z = integral();
  if (!(z > 0.0) || !std::isfinite(z)) throw NonNormalizable("grid density integrates to zero");
  for (double& v : values_) v /= z;
}

namespace {

template <class F>
double trapezoid(std::span<const double> grid, double h, F&& f) {
  const std::size_t n = grid.size();
  double acc = 0.5 * (f(0) + f(n - 1));
  for (std::size_t i = 1; i + 1 < n; ++i) acc += f(i);
  (void)grid;
  return acc * h;
}

}  // namespace

double GridDensity::integral() const noexcept {
  return trapezoid(grid_, cell_width_, [&](std::size_t i) { return values_[i]; });
}

double GridDensity::mean() const noexcept {
  return trapezoid(grid_, cell_width_, [&](std::size_t i) { return grid_[i] * values_[i]; });
}

double GridDensity::variance() const noexcept {
  const double m = mean();
  return trapezoid(grid_, cell_width_, [&](std::size_t i) {
    const double d = grid_[i] - m;
    return d * d * values_[i];
  });
}

double GridDensity::value_at(double x) const noexcept {
  if (x < grid_.front() || x > grid_.back()) return 0.0;
  const double pos = (x - grid_.front()) / cell_width_;
  const auto lo = std::min(static_cast<std::size_t>(pos), grid_.size() - 2);
  const double frac = pos - static_cast<double>(lo);
  return (1.0 - frac) * values_[lo] + frac * values_[lo + 1];
}

double GridDensity::total_variation(const std::function<double(double)>& other_pdf) const {
  return 0.5 * trapezoid(grid_, cell_width_, [&](std::size_t i) {
           return std::abs(values_[i] - other_pdf(grid_[i]));
         });
}

GridDensity gamma_powered_numeric(const Gmm1D& uncond, const Gmm1D& cond, double gamma,
                                  const GridSpec& grid) {
  if (grid.points < 2 || !(grid.hi > grid.lo)) throw InvalidSpec("degenerate density grid");
  std::vector<double> logs(grid.points);
  const double h = (grid.hi - grid.lo) / static_cast<double>(grid.points - 1);
  double peak = kNegInf;
  for (std::size_t i = 0; i < grid.points; ++i) {
    const double x = grid.lo + h * static_cast<double>(i);
    double l = gamma * cond.log_density(x);
    if (gamma != 1.0) l += (1.0 - gamma) * uncond.log_density(x);
    logs[i] = l;
    if (std::isfinite(l)) peak = std::max(peak, l);
  }
  if (!std::isfinite(peak)) throw NonNormalizable("gamma-powered density underflows on the grid");
  std::vector<double> values(grid.points);
  for (std::size_t i = 0; i < grid.points; ++i) {
    values[i] = std::isfinite(logs[i]) ? std::exp(logs[i] - peak) : 0.0;
  }
  if (values.front() > 1e-6 || values.back() > 1e-6) {
    throw NonNormalizable("gamma-powered density does not decay inside the grid");
  }
  return GridDensity(grid, std::move(values));
}

GridDensity gamma_powered_numeric(const Gmm1D& uncond, const Gmm1D& cond, double gamma) {
  return gamma_powered_numeric(uncond, cond, gamma, default_grid(uncond, cond));
}

double posterior_mean_x0(const Gmm1D& m0, double x, double alpha_bar) {
  if (!(alpha_bar > 0.0 && alpha_bar <= 1.0)) {
    throw TimeOutOfRange("alpha_bar must lie in (0, 1]");
  }
  if (alpha_bar == 1.0) return x;
  const double s = m0.transformed_score(x, std::sqrt(alpha_bar), 1.0 - alpha_bar);
  return (x + (1.0 - alpha_bar) * s) / std::sqrt(alpha_bar);
}

double posterior_mean_x0(const Gmm1D& m0, double x, double t, const ForwardProcess& process) {
  const auto* vp = process.vp();
  if (vp == nullptr) throw InvalidSpec("posterior_mean_x0 is defined for the VP process only");
  return posterior_mean_x0(m0, x, vp->alpha_bar(t));
}

}  // namespace glab
