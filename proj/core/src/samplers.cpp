#include "glab/samplers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "glab/errors.hpp"

namespace glab {

double ExactScores::unconditional(double x, double t) const {
  return model_->unconditional().transformed_score(x, process_->signal_scale(t),
                                                   process_->noise_var(t));
}

double ExactScores::conditional(double x, double t, std::size_t cls) const {
  return model_->conditional(cls).transformed_score(x, process_->signal_scale(t),
                                                    process_->noise_var(t));
}

double ExactScores::unconditional_at(double x, const NoiseLevel& level) const {
  return model_->unconditional().transformed_score(x, level.scale, level.added_var);
}

double ExactScores::conditional_at(double x, const NoiseLevel& level, std::size_t cls) const {
  return model_->conditional(cls).transformed_score(x, level.scale, level.added_var);
}

NoiseLevel noise_level(const ForwardProcess& process, double t) {
  return {t, process.signal_scale(t), process.noise_var(t)};
}

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::Ddpm: return "DDPM";
    case Variant::Ddim: return "DDIM";
    case Variant::CfgDdpm: return "CFG_DDPM";
    case Variant::CfgDdim: return "CFG_DDIM";
    case Variant::PcgTheory: return "PCG_THEORY";
    case Variant::PcgExplicit: return "PCG_EXPLICIT";
    case Variant::LdOnly: return "LD_ONLY";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (auto v : {Variant::Ddpm, Variant::Ddim, Variant::CfgDdpm, Variant::CfgDdim,
                 Variant::PcgTheory, Variant::PcgExplicit, Variant::LdOnly}) {
    if (to_string(v) == name) return v;
  }
  throw InvalidSpec("unknown sampler variant '" + std::string(name) + "'");
}

std::string_view to_string(TimeRule r) noexcept {
  return r == TimeRule::Midpoint ? "midpoint" : "source";
}

TimeRule parse_time_rule(std::string_view name) {
  if (name == "midpoint") return TimeRule::Midpoint;
  if (name == "source") return TimeRule::Source;
  throw InvalidSpec("unknown time rule '" + std::string(name) + "'");
}

namespace {

bool is_pcg(Variant v) { return v == Variant::PcgTheory || v == Variant::PcgExplicit; }

}  // namespace

void SamplerSpec::validate() const {
  if (steps <= 0) throw InvalidSpec("steps must be positive");
  if (chains == 0) throw InvalidSpec("chains must be positive");
  if (K < 0) throw InvalidSpec("K must be non-negative");
  if (!std::isfinite(gamma)) throw InvalidSpec("gamma must be finite");
  if (variant == Variant::LdOnly && !(ld_step > 0.0)) {
    throw InvalidSpec("LD_ONLY needs a positive step size");
  }
  if (variant == Variant::PcgExplicit && process.kind != ProcessKind::Vp) {
    throw InvalidSpec("PCG_EXPLICIT needs the discrete VP schedule");
  }
}

namespace {

inline void require_finite(double x) {
  if (!std::isfinite(x)) throw NonFiniteState("chain state became non-finite");
}

// rate is g(t)² = β(t) for VP and 1 for VE; only VP carries the ½βx drift.
inline double ddpm_update(double x, double rate, bool vp, double dt, double score,
                          double noise) {
  const double drift = vp ? 0.5 * rate * x + rate * score : score;
  return x + drift * dt + std::sqrt(rate * dt) * noise;
}

inline double ddim_update(double x, double rate, bool vp, double dt, double score) {
  const double drift = vp ? 0.5 * rate * (x + score) : 0.5 * score;
  return x + drift * dt;
}

inline double langevin_update(double x, double eps, double mixed, double noise) {
  return x + 0.5 * eps * mixed + std::sqrt(eps) * noise;
}

// Per-run table of the time-dependent coefficients; shared by all chains.
struct Plan {
  struct Step {
    NoiseLevel eval;  // where the predictor score is read
    NoiseLevel dest;  // destination node t−Δt (PCG correctors)
    double rate;      // g² at the evaluation point (DDPM/DDIM) or destination (PCG)
    double alpha_bar_src = 1.0;
    double alpha_bar_dst = 1.0;
    double beta_dst = 0.0;  // discrete β at the destination (PCG_EXPLICIT)
  };
  std::vector<Step> steps;  // in sampling order (t = T first)
  double dt = 0.0;
  bool vp = false;
  NoiseLevel data_level{0.0, 1.0, 0.0};
};

Plan make_plan(const SamplerSpec& spec, const ForwardProcess& process) {
  Plan plan;
  const TimeGrid grid(process.horizon(), spec.steps);
  plan.dt = grid.dt();
  plan.vp = process.kind() == ProcessKind::Vp;
  if (spec.variant == Variant::LdOnly) return plan;
  const auto* vp = process.vp();
  if (vp != nullptr && vp->steps() != spec.steps) {
    throw InvalidSpec("VP schedule step count differs from the sampler's");
  }
  plan.steps.reserve(static_cast<std::size_t>(spec.steps));
  for (int k = spec.steps; k >= 1; --k) {
    Plan::Step s;
    const double t_src = grid.at(k);
    const double t_dst = grid.at(k - 1);
    s.dest = noise_level(process, t_dst);
    if (is_pcg(spec.variant)) {
      s.eval = noise_level(process, t_src);
      s.rate = process.diffusion_rate(t_dst);
      if (vp != nullptr) {
        s.alpha_bar_src = vp->alpha_bar_at(k);
        s.alpha_bar_dst = vp->alpha_bar_at(k - 1);
        s.beta_dst = vp->discrete_beta(k - 1);
      }
    } else {
      const double t_eval =
          spec.time_rule == TimeRule::Midpoint ? 0.5 * (t_src + t_dst) : t_src;
      s.eval = noise_level(process, t_eval);
      s.rate = process.diffusion_rate(t_eval);
    }
    plan.steps.push_back(s);
  }
  return plan;
}

double run_chain(const SamplerSpec& spec, const Plan& plan, const ScoreSource& scores,
                 const ForwardProcess& process, RandomStream& rng) {
  const std::size_t cls = spec.class_label;
  const double gamma = spec.gamma;
  const double dt = plan.dt;
  double x = prior_sample(process, rng);

  switch (spec.variant) {
    case Variant::Ddpm:
      for (const auto& s : plan.steps) {
        const double sc = scores.conditional_at(x, s.eval, cls);
        x = ddpm_update(x, s.rate, plan.vp, dt, sc, rng.normal());
        require_finite(x);
      }
      break;
    case Variant::Ddim:
      for (const auto& s : plan.steps) {
        const double sc = scores.conditional_at(x, s.eval, cls);
        x = ddim_update(x, s.rate, plan.vp, dt, sc);
        require_finite(x);
      }
      break;
    case Variant::CfgDdpm:
      for (const auto& s : plan.steps) {
        const double mixed = guided_score(scores.scores_at(x, s.eval, cls), gamma);
        x = ddpm_update(x, s.rate, plan.vp, dt, mixed, rng.normal());
        require_finite(x);
      }
      break;
    case Variant::CfgDdim:
      for (const auto& s : plan.steps) {
        const double mixed = guided_score(scores.scores_at(x, s.eval, cls), gamma);
        x = ddim_update(x, s.rate, plan.vp, dt, mixed);
        require_finite(x);
      }
      break;
    case Variant::PcgTheory:
      for (const auto& s : plan.steps) {
        const double sc = scores.conditional_at(x, s.eval, cls);
        x = ddim_update(x, s.rate, plan.vp, dt, sc);
        const double eps = s.rate * dt;
        for (int k = 0; k < spec.K; ++k) {
          const double mixed = guided_score(scores.scores_at(x, s.dest, cls), gamma);
          x = langevin_update(x, eps, mixed, rng.normal());
        }
        require_finite(x);
      }
      break;
    case Variant::PcgExplicit:
      for (const auto& s : plan.steps) {
        const ScorePair sp = scores.scores_at(x, s.eval, cls);
        const double sigma_src = std::sqrt(1.0 - s.alpha_bar_src);
        double eps_c = -sigma_src * sp.cond;
        double eps_u = -sigma_src * sp.uncond;
        const double x0_hat = (x - sigma_src * eps_c) / std::sqrt(s.alpha_bar_src);
        x = std::sqrt(s.alpha_bar_dst) * x0_hat + std::sqrt(1.0 - s.alpha_bar_dst) * eps_c;
        // At t = 0 (ᾱ = 1) the update divides by zero; the corrector is skipped there.
        if (s.alpha_bar_dst < 1.0) {
          const double sigma_dst = std::sqrt(1.0 - s.alpha_bar_dst);
          const double coef = s.beta_dst / (2.0 * sigma_dst);
          const double noise_sd = std::sqrt(s.beta_dst);
          for (int k = 0; k < spec.K; ++k) {
            if (spec.refresh_noise_predictions) {
              const ScorePair fresh = scores.scores_at(x, s.dest, cls);
              eps_c = -sigma_dst * fresh.cond;
              eps_u = -sigma_dst * fresh.uncond;
            }
            x = x - coef * guided_score({eps_u, eps_c}, gamma) + noise_sd * rng.normal();
          }
        }
        require_finite(x);
      }
      break;
    case Variant::LdOnly:
      for (int i = 0; i < spec.steps; ++i) {
        const double mixed = guided_score(scores.scores_at(x, plan.data_level, cls), gamma);
        x = langevin_update(x, spec.ld_step, mixed, rng.normal());
        require_finite(x);
      }
      break;
  }
  return x;
}

SampleBatch run_batch(const SamplerSpec& spec, const ScoreSource& scores,
                      const ForwardProcess& process) {
  spec.validate();
  if (process.kind() != spec.process.kind) {
    throw InvalidSpec("sampler spec and forward process disagree on the process kind");
  }
  const auto start = std::chrono::steady_clock::now();
  const Plan plan = make_plan(spec, process);

  SampleBatch batch;
  batch.spec = spec;
  batch.outside_theorem_form = is_pcg(spec.variant) && process.kind() == ProcessKind::Ve;

  const std::size_t n = spec.chains;
  std::vector<double> out(n);
  std::vector<char> ok(n, 0);

  unsigned threads = spec.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                       : spec.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&](std::size_t begin, std::size_t end) {
    try {
      for (std::size_t i = begin; i < end; ++i) {
        RandomStream rng(spec.seed, i);
        try {
          out[i] = run_chain(spec, plan, scores, process, rng);
          ok[i] = 1;
        } catch (const NonFiniteState&) {
          ok[i] = 0;
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  if (threads <= 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  batch.values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (ok[i]) {
      batch.values.push_back(out[i]);
    } else {
      ++batch.aborted;
    }
  }
  if (static_cast<double>(batch.aborted) > 0.001 * static_cast<double>(n)) {
    throw NonFiniteState(std::to_string(batch.aborted) + " of " + std::to_string(n) +
                         " chains diverged (limit 0.1%)");
  }
  batch.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return batch;
}

}  // namespace

double ddpm_step(double x, double t, double dt, double score, const ForwardProcess& process,
                 double noise) {
  const double next = ddpm_update(x, process.diffusion_rate(t),
                                  process.kind() == ProcessKind::Vp, dt, score, noise);
  require_finite(next);
  return next;
}

double ddpm_step(double x, double t, double dt, double score, const ForwardProcess& process,
                 RandomStream& rng) {
  return ddpm_step(x, t, dt, score, process, rng.normal());
}

double ddim_step(double x, double t, double dt, double score, const ForwardProcess& process) {
  const double next =
      ddim_update(x, process.diffusion_rate(t), process.kind() == ProcessKind::Vp, dt, score);
  require_finite(next);
  return next;
}

double cfg_step(double x, double t, double dt, ScorePair scores, double gamma,
                const ForwardProcess& process, Variant variant, RandomStream& rng) {
  const double mixed = guided_score(scores, gamma);
  switch (variant) {
    case Variant::CfgDdpm: return ddpm_step(x, t, dt, mixed, process, rng);
    case Variant::CfgDdim: return ddim_step(x, t, dt, mixed, process);
    default: throw InvalidSpec("cfg_step needs CFG_DDPM or CFG_DDIM");
  }
}

double langevin_step(double x, double eps, ScorePair scores, double gamma, double noise) {
  if (!(eps > 0.0)) throw InvalidSpec("Langevin step size must be positive");
  const double next = langevin_update(x, eps, guided_score(scores, gamma), noise);
  require_finite(next);
  return next;
}

double langevin_step(double x, double eps, ScorePair scores, double gamma, RandomStream& rng) {
  return langevin_step(x, eps, scores, gamma, rng.normal());
}

double sample_chain(const SamplerSpec& spec, const ScoreSource& scores,
                    const ForwardProcess& process, RandomStream& rng) {
  spec.validate();
  return run_chain(spec, make_plan(spec, process), scores, process, rng);
}

SampleBatch pcg_theory_sample(const SamplerSpec& spec, const ScoreSource& scores,
                              const ForwardProcess& process) {
  SamplerSpec s = spec;
  s.variant = Variant::PcgTheory;
  return run_batch(s, scores, process);
}

SampleBatch pcg_theory_sample(const SamplerSpec& spec, const ConditionalModel& model) {
  SamplerSpec s = spec;
  s.variant = Variant::PcgTheory;
  return run_sampler(s, model);
}

SampleBatch pcg_explicit_sample(const SamplerSpec& spec, const ScoreSource& scores,
                                const ForwardProcess& process) {
  SamplerSpec s = spec;
  s.variant = Variant::PcgExplicit;
  return run_batch(s, scores, process);
}

SampleBatch pcg_explicit_sample(const SamplerSpec& spec, const ConditionalModel& model) {
  SamplerSpec s = spec;
  s.variant = Variant::PcgExplicit;
  return run_sampler(s, model);
}

SampleBatch run_sampler(const SamplerSpec& spec, const ScoreSource& scores,
                        const ForwardProcess& process) {
  return run_batch(spec, scores, process);
}

SampleBatch run_sampler(const SamplerSpec& spec, const ConditionalModel& model) {
  spec.validate();
  model.conditional(spec.class_label);
  const ForwardProcess process = ForwardProcess::make(spec.process, spec.steps);
  const ExactScores scores(model, process);
  return run_batch(spec, scores, process);
}

}  // namespace glab
