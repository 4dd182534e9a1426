// Acceptance run: one PASS/FAIL line per criterion on stdout, exit status 1
// if any criterion fails. Sample sizes and tolerances are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "glab/closed_form.hpp"
#include "glab/experiments.hpp"
#include "glab/fixtures.hpp"
#include "glab/gmm.hpp"
#include "glab/samplers.hpp"
#include "glab/scorenet.hpp"
#include "glab/stats.hpp"

using namespace glab;

namespace {

const ProcessConfig kVe{ProcessKind::Ve, 0.1, 20.0, 100.0};
const ProcessConfig kVp{};

int g_failed = 0;
int g_total = 0;

void report(int id, bool ok, const std::string& detail) {
  ++g_total;
  if (!ok) ++g_failed;
  std::printf("AC%-2d %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

SamplerSpec spec_of(Variant v, double gamma, ProcessConfig pc, int steps, std::size_t chains, int K = 0) {
  SamplerSpec s;
  s.variant = v;
  s.gamma = gamma;
  s.process = pc;
  s.steps = steps;
  s.chains = chains;
  s.K = K;
  s.seed = 42;
  s.threads = 0;
  return s;
}

std::vector<double> sample(const SamplerSpec& s, const ConditionalModel& m) { return run_sampler(s, m).values; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool rel_within(double v, double ref, double tol) { return std::abs(v - ref) <= tol * std::abs(ref); }

// 1: first counterexample at γ = 3, with the single-core runtime budget.
void criterion1() {
  const ConditionalModel m = fixture("counterexample1");
  SamplerSpec ddim = spec_of(Variant::CfgDdim, 3.0, kVe, 2000, 200000);
  SamplerSpec ddpm = spec_of(Variant::CfgDdpm, 3.0, kVe, 2000, 200000);
  ddim.threads = ddpm.threads = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const double v_ddim = summarize(sample(ddim, m)).var;
  const double v_ddpm = summarize(sample(ddpm, m)).var;
  const double secs = seconds_since(t0);
  const bool ok = rel_within(v_ddim, 0.25, 0.03) && rel_within(v_ddpm, 0.3875, 0.05) && secs <= 300.0;
  report(1, ok,
         "var CFG_DDIM " + fmt("%.5f", v_ddim) + " (0.25 +-3%), var CFG_DDPM " + fmt("%.5f", v_ddpm) +
             " (0.3875 +-5%), " + fmt("%.1f", secs) + " s for gamma=3 on one thread (<= 300)");
}

// 2: γ sweep against all three closed-form curves, plus the sharpness ordering.
void criterion2() {
  const ConditionalModel m = fixture("counterexample1");
  bool ok = true;
  double worst = 0.0;
  double min_margin = 1e9;
  for (double g : {1.0, 1.5, 2.0, 3.0, 5.0}) {
    const SummaryStats di = summarize(sample(spec_of(Variant::CfgDdim, g, kVe, 2000, 200000), m));
    const SummaryStats dp = summarize(sample(spec_of(Variant::CfgDdpm, g, kVe, 2000, 200000), m));
    const SummaryStats ld = summarize(sample(spec_of(Variant::LdOnly, g, kVe, 2000, 200000), m));
    const double ref[3] = {ce1_ddim_variance(g), ce1_ddpm_variance(g), ce1_gamma_variance(g)};
    const double got[3] = {di.var, dp.var, ld.var};
    for (int k = 0; k < 3; ++k) {
      const double rel = std::abs(got[k] - ref[k]) / ref[k];
      worst = std::max(worst, rel);
      ok &= rel <= 0.05;
    }
    if (g > 1.0) {
      // Gaps in units of the combined standard error.
      const double m1 = (dp.var - di.var) / std::hypot(dp.se_var, di.se_var);
      const double m2 = (ld.var - dp.var) / std::hypot(ld.se_var, dp.se_var);
      min_margin = std::min({min_margin, m1, m2});
      ok &= m1 > 3.0 && m2 > 3.0;
    }
  }
  report(2, ok,
         "worst relative error vs closed forms " + fmt("%.4f", worst) + " (<= 0.05); smallest ordering gap " +
             fmt("%.1f", min_margin) + " SE (> 3)");
}

// 3: refinement of KS(CFG_DDPM(3), PCG_THEORY(5)) plus the mismatched-weight control;
// 4 reuses nothing from here.
void criterion3() {
  const ConditionalModel m = fixture("counterexample1");
  std::vector<double> ks;
  std::vector<double> ref_final;
  for (int steps : {250, 500, 1000, 2000}) {
    const auto ref = sample(spec_of(Variant::CfgDdpm, 3.0, kVp, steps, 100000), m);
    const auto pcg = sample(spec_of(Variant::PcgTheory, 5.0, kVp, steps, 100000, 1), m);
    ks.push_back(ks_two_sample(ref, pcg));
    if (steps == 2000) ref_final = ref;
  }
  const double ks_nc = ks_two_sample(ref_final, sample(spec_of(Variant::PcgTheory, 3.0, kVp, 2000, 100000, 1), m));
  bool monotone = true;
  for (std::size_t i = 1; i < ks.size(); ++i) monotone &= ks[i] <= ks[i - 1];
  const bool ok = ks.back() < 0.02 && monotone && ks_nc > 0.05;
  std::string seq;
  for (double k : ks) seq += (seq.empty() ? "" : " ") + fmt("%.5f", k);
  report(3, ok,
         "KS at 250/500/1000/2000 steps: " + seq + " (last < 0.02, non-increasing: " + (monotone ? "yes" : "no") +
             "); negative control KS " + fmt("%.5f", ks_nc) + " (> 0.05)");
}

// 4: γ = 1 degeneracies.
void criterion4() {
  bool bits = true;
  for (const char* name : {"counterexample1", "counterexample2"}) {
    const ConditionalModel m = fixture(name);
    for (const ProcessConfig& pc : {kVe, kVp}) {
      bits &= sample(spec_of(Variant::CfgDdpm, 1.0, pc, 1000, 10000), m) ==
              sample(spec_of(Variant::Ddpm, 1.0, pc, 1000, 10000), m);
      bits &= sample(spec_of(Variant::CfgDdim, 1.0, pc, 1000, 10000), m) ==
              sample(spec_of(Variant::Ddim, 1.0, pc, 1000, 10000), m);
    }
  }
  const ConditionalModel ce1 = fixture("counterexample1");
  const double ks = ks_two_sample(sample(spec_of(Variant::Ddpm, 1.0, kVp, 2000, 100000), ce1),
                                  sample(spec_of(Variant::PcgTheory, 1.0, kVp, 2000, 100000, 1), ce1));
  report(4, bits && ks < 0.012,
         std::string("CFG at gamma=1 bit-identical to plain samplers: ") + (bits ? "yes" : "no") +
             "; KS DDPM vs PCG_THEORY(1, K=1) " + fmt("%.5f", ks) + " (< 0.012)");
}

// 5: second counterexample, μ = 3, γ = 2.
void criterion5() {
  const ConditionalModel m = fixture("counterexample2");
  const std::size_t n = 100000;
  const auto cond = sample(spec_of(Variant::Ddpm, 1.0, kVe, 2000, n), m);
  const double ks = ks_one_sample(cond, [](double x) { return 0.5 * std::erfc(-(x + 3.0) / std::sqrt(2.0)); });
  const SummaryStats dp = summarize(sample(spec_of(Variant::CfgDdpm, 2.0, kVe, 2000, n), m));
  const SummaryStats di = summarize(sample(spec_of(Variant::CfgDdim, 2.0, kVe, 2000, n), m));
  const double shift_se = (-3.0 - dp.mean) / dp.se_mean;
  const double skew_se = std::abs(di.skew) / di.se_skew;
  report(5, ks < 0.02 && shift_se > 5.0 && skew_se > 5.0,
         "KS conditional DDPM vs N(-3,1) " + fmt("%.5f", ks) + " (< 0.02); CFG_DDPM mean " + fmt("%.4f", dp.mean) +
             " = " + fmt("%.1f", shift_se) + " SE below -3 (> 5); |skew CFG_DDIM| " + fmt("%.4f", std::abs(di.skew)) +
             " = " + fmt("%.1f", skew_se) + " SE (> 5)");
}

// 6: wider clusters make the two guided samplers agree more (class-averaged W1).
void criterion6() {
  double w1[2] = {0.0, 0.0};
  const double sigmas[2] = {1.0, 2.0};
  for (int k = 0; k < 2; ++k) {
    const ConditionalModel m = fixture("counterexample3", {3.0, sigmas[k]});
    for (std::size_t c = 0; c < 3; ++c) {
      SamplerSpec di = spec_of(Variant::CfgDdim, 3.0, kVe, 2000, 30000);
      SamplerSpec dp = spec_of(Variant::CfgDdpm, 3.0, kVe, 2000, 30000);
      di.class_label = dp.class_label = c;
      w1[k] += wasserstein1(sample(di, m), sample(dp, m)) / 3.0;
    }
  }
  report(6, w1[1] < w1[0],
         "W1(CFG_DDIM, CFG_DDPM) " + fmt("%.5f", w1[1]) + " at sigma=2 vs " + fmt("%.5f", w1[0]) + " at sigma=1");
}

// 7: the oracles themselves.
void criterion7() {
  double score_err = 0.0;
  std::vector<Gmm1D> mixtures;
  for (const auto& name : fixture_names()) {
    const ConditionalModel m = fixture(name);
    mixtures.push_back(m.unconditional());
    for (const auto& c : m.classes()) mixtures.push_back(c.conditional);
  }
  const ForwardProcess vp = VpSchedule();
  const std::size_t base = mixtures.size();
  for (std::size_t i = 0; i < base; ++i) {
    for (double t : {0.01, 0.2}) mixtures.push_back(noisy(mixtures[i], t, vp));
  }
  for (const Gmm1D& g : mixtures) {
    const auto [lo, hi] = g.span_sigmas(10.0);
    for (int i = 0; i <= 10000; ++i) {
      const double x = lo + (hi - lo) * i / 10000.0;
      const double h = 1e-5;
      const double fd = (g.log_density(x + h) - g.log_density(x - h)) / (2 * h);
      score_err = std::max(score_err, std::abs(g.score(x) - fd));
    }
  }

  // RK4 on dx/dt = ½x[γ/(1+t) + (1−γ)/(2+t)] from T down to t.
  double traj_err = 0.0;
  for (double g : {0.5, 1.0, 1.5, 2.0, 3.0, 5.0}) {
    const auto f = [g](double t, double x) { return 0.5 * x * (g / (1.0 + t) + (1.0 - g) / (2.0 + t)); };
    for (double t_end : {0.0, 1.0, 10.0, 50.0}) {
      const int n = 20000;
      double x = 10.0;
      double t = 100.0;
      const double hstep = (t_end - t) / n;
      for (int i = 0; i < n; ++i) {
        const double k1 = f(t, x);
        const double k2 = f(t + hstep / 2, x + hstep / 2 * k1);
        const double k3 = f(t + hstep / 2, x + hstep / 2 * k2);
        const double k4 = f(t + hstep, x + hstep * k3);
        x += hstep / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        t += hstep;
      }
      traj_err = std::max(traj_err, std::abs(x - ce1_ddim_trajectory(10.0, 100.0, t_end, g)));
    }
  }

  double form_err = 0.0;
  RandomStream rng(7, 0);
  for (int i = 0; i < 2000; ++i) {
    const double mu = 4.0 * (rng.uniform() - 0.5);
    const double var = 0.1 + 3.0 * rng.uniform();
    const double T = 1.0 + 99.0 * rng.uniform();
    const double t = T * rng.uniform();
    const double xT = 20.0 * (rng.uniform() - 0.5);
    const LinearDriftSpec d = ve_gaussian_ddim_drift(mu, var);
    form_err = std::max(form_err, std::abs(ode_solution(d, xT, T, t) - ode_solution_fixed_point(d, xT, T, t)));
    const LinearDriftSpec c = ce1_ddim_drift(0.5 + 4.0 * rng.uniform());
    form_err = std::max(form_err, std::abs(ode_solution(c, xT, T, t) - ode_solution_fixed_point(c, xT, T, t)));
  }
  report(7, score_err < 1e-6 && traj_err < 1e-6 && form_err < 1e-12,
         "score vs finite difference " + fmt("%.2e", score_err) + " (< 1e-6); trajectory vs RK4 " +
             fmt("%.2e", traj_err) + " (< 1e-6); general vs fixed-point form " + fmt("%.2e", form_err) +
             " (< 1e-12)");
}

// 8: Langevin dynamics alone settles on N(0, 2/(γ+1)).
void criterion8() {
  SamplerSpec s = spec_of(Variant::LdOnly, 3.0, kVe, 10000, 20000);
  s.ld_step = 0.01;
  const SummaryStats st = summarize(sample(s, fixture("counterexample1")));
  report(8, rel_within(st.var, 0.5, 0.04), "LD_ONLY variance " + fmt("%.5f", st.var) + " (0.5 +-4%)");
}

// 9: gradient check of the training network, then the generalization experiment.
void criterion9() {
  TrainConfig tc = generalization_train_defaults();
  ScoreNet net = ScoreNet::initialized(tc.arch, kVp, 42, tc.process_steps, false);
  RandomStream rng(9, 0);
  double worst = 0.0;
  for (int p = 0; p < 100; ++p) {
    const double x = 4.0 * rng.normal();
    const double t = tc.t_min + (1.0 - tc.t_min) * rng.uniform();
    const double up = rng.normal();
    const std::vector<double> g = net.backward(x, t, up);
    auto theta = net.params();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double keep = theta[k];
      theta[k] = keep + 1e-5;
      const double fp = net.forward(x, t);
      theta[k] = keep - 1e-5;
      const double fm = net.forward(x, t);
      theta[k] = keep;
      const double fd = up * (fp - fm) / 2e-5;
      worst = std::max(worst, std::abs(g[k] - fd) / std::max({std::abs(g[k]), std::abs(fd), 1e-3}));
    }
  }
  ExperimentConfig cfg;
  cfg.experiment = "generalization";
  cfg.seed = 42;
  cfg.write_outputs = false;
  const ExperimentReport r = run_generalization(cfg);
  std::string detail = "gradient check worst relative error " + fmt("%.2e", worst) + " (< 1e-5)";
  for (const auto& v : r.verdicts) {
    detail += "; " + v.name + ": " + fmt("%.4f", v.empirical) + " vs " + fmt("%.4f", v.reference) + " " +
              std::string(to_string(v.status));
  }
  report(9, worst < 1e-5 && r.passed() && !r.verdicts.empty(), detail);
}

// 10: reruns and scheduling do not change a single byte.
void criterion10() {
  bool ok = true;
  std::string bad;
  for (const auto& name : experiment_names()) {
    ExperimentConfig c;
    c.experiment = name;
    c.chains = 3000;
    c.steps = 300;
    c.write_outputs = false;
    if (name == "equivalence") c.step_counts = std::vector<int>{150, 300};
    if (name == "counterexample1") c.ld_steps = 600;
    if (name == "generalization") {
      TrainConfig t = generalization_train_defaults();
      t.max_epochs = 4;
      t.dataset_size = 500;
      t.process_steps = 300;
      c.train = t;
    }
    const std::string first = rows_csv(run_experiment(c));
    c.jobs = 4;
    const bool same = first == rows_csv(run_experiment(c)) && first == rows_csv(run_experiment(c));
    if (!same) bad += " " + name;
    ok &= same;
  }
  const ConditionalModel m = fixture("counterexample3");
  for (Variant v : {Variant::CfgDdpm, Variant::CfgDdim, Variant::PcgTheory, Variant::PcgExplicit, Variant::LdOnly}) {
    SamplerSpec s = spec_of(v, 3.0, kVp, 100, 100000, 2);
    s.threads = 1;
    const auto serial = sample(s, m);
    s.threads = 4;
    const bool same = serial == sample(s, m);
    if (!same) bad += " " + std::string(to_string(v));
    ok &= same;
  }
  report(10, ok, std::string("CSV byte-identical across reruns and --jobs 1/4 for all experiments; "
                              "threads 1/4 bit-identical for 5 samplers") +
                     (ok ? "" : "; mismatch in:" + bad));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8,
                                                       criterion9, criterion10};
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i) + 1, false, std::string("error: ") + e.what());
    }
  }
  std::printf("acceptance: %d/%d passed in %.0f s\n", g_total - g_failed, g_total, seconds_since(t0));
  return g_failed == 0 ? 0 : 1;
}
