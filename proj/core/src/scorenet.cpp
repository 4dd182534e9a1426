#include "glab/scorenet.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "glab/errors.hpp"
#include "glab/rng.hpp"

namespace glab {

namespace {

constexpr std::size_t kMaxWidth = 256;
constexpr double kMinNoiseTime = 1e-5;  // σ_t floor for InverseNoiseStd
constexpr char kMagic[4] = {'G', 'L', 'S', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

ScoreNet::ScoreNet(ScoreNetArch arch, ProcessConfig process, int process_steps)
    : arch_(std::move(arch)),
      process_config_(process),
      process_steps_(process_steps),
      process_(ForwardProcess::make(process, process_steps)) {
  std::size_t in = kInputs;
  std::size_t offset = 0;
  auto add = [&](std::size_t out) {
    layers_.push_back({in, out, offset});
    offset += in * out + out;
    in = out;
  };
  for (int w : arch_.hidden) {
    if (w <= 0 || static_cast<std::size_t>(w) > kMaxWidth) {
      throw InvalidSpec("hidden width must be in [1, 256]");
    }
    add(static_cast<std::size_t>(w));
  }
  add(1);
  params_.assign(offset, 0.0);
}

ScoreNet ScoreNet::initialized(ScoreNetArch arch, ProcessConfig process, std::uint64_t seed,
                               int process_steps, bool zero_output) {
  ScoreNet net(std::move(arch), process, process_steps);
  RandomStream rng(seed, 0x6e6574);
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    const Layer& L = net.layers_[l];
    if (zero_output && l + 1 == net.layers_.size()) break;
    const double sd = std::sqrt(2.0 / static_cast<double>(L.in + L.out));
    for (std::size_t k = 0; k < L.in * L.out; ++k) net.params_[L.offset + k] = sd * rng.normal();
  }
  return net;
}

void ScoreNet::features(double x, double t, double* out) const {
  const double tau = std::max(t, 0.0) / process_.horizon();
  out[0] = x;
  out[1] = tau;
  out[2] = std::sqrt(tau);
}

double ScoreNet::output_factor(double t) const {
  if (arch_.output == OutputScale::Identity) return 1.0;
  return 1.0 / std::sqrt(process_.noise_var(std::max(t, kMinNoiseTime)));
}

double ScoreNet::raw_forward(const double* input, std::vector<std::vector<double>>* acts) const {
  std::array<double, kMaxWidth> a{};
  std::array<double, kMaxWidth> b{};
  std::copy(input, input + kInputs, a.begin());
  if (acts != nullptr) acts->assign(1, std::vector<double>(input, input + kInputs));

  const double* p = params_.data();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    const double* W = p + L.offset;
    const double* bias = W + L.in * L.out;
    const bool last = l + 1 == layers_.size();
    for (std::size_t o = 0; o < L.out; ++o) {
      double z = bias[o];
      const double* row = W + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) z += row[i] * a[i];
      b[o] = last ? z : std::tanh(z);
    }
    std::swap(a, b);
    if (acts != nullptr && !last) acts->emplace_back(a.begin(), a.begin() + L.out);
  }
  return a[0];
}

double ScoreNet::forward(double x, double t) const {
  double in[kInputs];
  features(x, t, in);
  return raw_forward(in, nullptr) * output_factor(t);
}

void ScoreNet::accumulate_gradient(double x, double t, double upstream,
                                   std::span<double> grad) const {
  if (grad.size() != params_.size()) throw InvalidSpec("gradient buffer has the wrong size");
  if (upstream == 0.0) return;
  double in[kInputs];
  features(x, t, in);
  std::vector<std::vector<double>> acts;
  raw_forward(in, &acts);

  // acts[l] is the input to layer l.
  std::array<double, kMaxWidth> delta{};
  std::array<double, kMaxWidth> prev{};
  delta[0] = upstream * output_factor(t);
  const double* p = params_.data();
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& L = layers_[l];
    const std::vector<double>& h = acts[l];
    const double* W = p + L.offset;
    double* gW = grad.data() + L.offset;
    double* gb = gW + L.in * L.out;
    for (std::size_t o = 0; o < L.out; ++o) {
      gb[o] += delta[o];
      double* grow = gW + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) grow[i] += delta[o] * h[i];
    }
    if (l == 0) break;
    // Back through W, then through the tanh that produced h.
    for (std::size_t i = 0; i < L.in; ++i) {
      double s = 0.0;
      for (std::size_t o = 0; o < L.out; ++o) s += W[o * L.in + i] * delta[o];
      prev[i] = s * (1.0 - h[i] * h[i]);
    }
    std::swap(delta, prev);
  }
}

std::vector<double> ScoreNet::backward(double x, double t, double upstream) const {
  std::vector<double> g(params_.size(), 0.0);
  accumulate_gradient(x, t, upstream, g);
  return g;
}

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const auto bits = std::bit_cast<U>(v);
  for (std::size_t k = 0; k < sizeof(U); ++k) out.put(static_cast<char>((bits >> (8 * k)) & 0xff));
}

template <typename T>
T get(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t k = 0; k < sizeof(U); ++k) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw IoError("checkpoint is truncated");
    bits |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * k);
  }
  return std::bit_cast<T>(bits);
}

}  // namespace

void ScoreNet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arch_.output));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arch_.hidden.size()));
  for (int w : arch_.hidden) put<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  put<std::uint32_t>(out, process_config_.kind == ProcessKind::Vp ? 0u : 1u);
  put<double>(out, process_config_.beta_min);
  put<double>(out, process_config_.beta_max);
  put<double>(out, process_config_.ve_horizon);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(process_steps_));
  put<std::uint64_t>(out, params_.size());
  for (double v : params_) put<double>(out, v);
  if (!out) throw IoError("write failed for " + path.string());
}

ScoreNet ScoreNet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw IoError(path.string() + " is not a score network checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  ScoreNetArch arch;
  const auto scale = get<std::uint32_t>(in);
  if (scale > 1) throw IoError("bad output scale in checkpoint");
  arch.output = static_cast<OutputScale>(scale);
  const auto depth = get<std::uint32_t>(in);
  if (depth > 64) throw IoError("bad layer count in checkpoint");
  arch.hidden.clear();
  for (std::uint32_t i = 0; i < depth; ++i) arch.hidden.push_back(static_cast<int>(get<std::uint32_t>(in)));
  ProcessConfig pc;
  pc.kind = get<std::uint32_t>(in) == 0 ? ProcessKind::Vp : ProcessKind::Ve;
  pc.beta_min = get<double>(in);
  pc.beta_max = get<double>(in);
  pc.ve_horizon = get<double>(in);
  const auto steps = static_cast<int>(get<std::uint32_t>(in));
  ScoreNet net(arch, pc, steps);
  const auto count = get<std::uint64_t>(in);
  if (count != net.num_params()) throw IoError("checkpoint parameter count does not match its architecture");
  for (auto& v : net.params_) v = get<double>(in);
  return net;
}

void TrainConfig::validate() const {
  if (batch_size == 0 || !(learning_rate > 0.0) || max_epochs <= 0 || patience <= 0 ||
      dataset_size < 10 || !(t_min > 0.0) || process_steps <= 0) {
    throw InvalidSpec("training configuration values must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidSpec("momentum must be in [0, 1)");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw InvalidSpec("validation fraction must be in (0, 1)");
  }
}

double dsm_loss(const ScoreNet& net, std::span<const double> x0, std::span<const double> t,
                std::span<const double> xi) {
  const ForwardProcess& proc = net.process();
  double acc = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double sigma = std::sqrt(proc.noise_var(t[i]));
    const double xt = proc.signal_scale(t[i]) * x0[i] + sigma * xi[i];
    const double err = sigma * net.forward(xt, t[i]) + xi[i];
    acc += err * err;
  }
  return acc / static_cast<double>(x0.size());
}

ScoreNet train_dsm(const Gmm1D& model, const ProcessConfig& process, const TrainConfig& cfg,
                   TrainReport* report) {
  cfg.validate();
  ScoreNet net = ScoreNet::initialized(cfg.arch, process, cfg.seed, cfg.process_steps);
  const ForwardProcess& proc = net.process();
  const double T = proc.horizon();

  RandomStream data_rng(cfg.seed, 1);
  std::vector<double> x0(cfg.dataset_size);
  for (double& v : x0) v = model.sample(data_rng);

  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(cfg.validation_fraction * static_cast<double>(x0.size()))));
  const std::span<const double> val_x0(x0.data(), n_val);
  const std::span<const double> train_x0(x0.data() + n_val, x0.size() - n_val);
  if (train_x0.empty()) throw InvalidSpec("validation fraction leaves no training data");

  std::vector<double> val_t(n_val);
  std::vector<double> val_xi(n_val);
  RandomStream val_rng(cfg.seed, 2);
  for (std::size_t i = 0; i < n_val; ++i) {
    val_t[i] = cfg.t_min + (T - cfg.t_min) * val_rng.uniform();
    val_xi[i] = val_rng.normal();
  }

  std::vector<double> grad(net.num_params());
  std::vector<double> velocity(net.num_params(), 0.0);
  std::vector<std::size_t> order(train_x0.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport rep;
  std::vector<double> best = std::vector<double>(net.params().begin(), net.params().end());
  rep.best_val_loss = dsm_loss(net, val_x0, val_t, val_xi);
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    RandomStream rng(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto bsz = static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const double t = cfg.t_min + (T - cfg.t_min) * rng.uniform();
        const double xi = rng.normal();
        const double sigma = std::sqrt(proc.noise_var(t));
        const double xt = proc.signal_scale(t) * train_x0[order[k]] + sigma * xi;
        const double err = sigma * net.forward(xt, t) + xi;
        epoch_loss += err * err;
        net.accumulate_gradient(xt, t, 2.0 * err * sigma / bsz, grad);
      }
      auto theta = net.params();
      for (std::size_t p = 0; p < theta.size(); ++p) {
        velocity[p] = cfg.momentum * velocity[p] - cfg.learning_rate * grad[p];
        theta[p] += velocity[p];
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    const double val = dsm_loss(net, val_x0, val_t, val_xi);
    if (!std::isfinite(epoch_loss) || !std::isfinite(val)) {
      throw DivergedTraining("training loss became non-finite at epoch " + std::to_string(epoch));
    }
    rep.train_loss.push_back(epoch_loss);
    rep.val_loss.push_back(val);
    if (val < rep.best_val_loss) {
      rep.best_val_loss = val;
      rep.best_epoch = epoch + 1;
      best.assign(net.params().begin(), net.params().end());
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      rep.stopped_early = true;
      break;
    }
  }
  std::copy(best.begin(), best.end(), net.params().begin());
  if (report != nullptr) *report = std::move(rep);
  return net;
}

LearnedScores::LearnedScores(ScoreNet unconditional, std::vector<ScoreNet> conditional)
    : uncond_(std::move(unconditional)), cond_(std::move(conditional)) {
  if (cond_.empty()) throw InvalidSpec("learned scores need at least one conditional network");
}

double LearnedScores::unconditional(double x, double t) const { return uncond_.forward(x, t); }

double LearnedScores::conditional(double x, double t, std::size_t cls) const {
  return conditional_net(cls).forward(x, t);
}

const ScoreNet& LearnedScores::conditional_net(std::size_t cls) const {
  if (cls >= cond_.size()) throw UnknownClass("no score network for class " + std::to_string(cls));
  return cond_[cls];
}

}  // namespace glab
