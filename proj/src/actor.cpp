#include "mecsim/actor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "mecsim/errors.hpp"

namespace mecsim {

using nlohmann::json;

namespace {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline double clamp_output(double v) {
  return std::clamp(v, ActorModel::kOutputEps, 1.0 - ActorModel::kOutputEps);
}

}  // namespace

ActorModel ActorModel::init(const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("actor dims: need at least input and output");
  for (int d : dims)
    if (d < 1) throw ConfigError("actor dims: all layer sizes must be >= 1");
  ActorModel m;
  m.dims = dims;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    int fan_in = dims[l], fan_out = dims[l + 1];
    double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(static_cast<size_t>(fan_in) * fan_out);
    for (double& v : w) v = (2.0 * rng.uniform() - 1.0) * scale;
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 0.0);
  }
  return m;
}

int ActorModel::param_count() const {
  int n = 0;
  for (size_t l = 0; l < weights.size(); ++l)
    n += static_cast<int>(weights[l].size() + biases[l].size());
  return n;
}

std::vector<double> ActorModel::forward(std::span<const double> features) const {
  if (features.size() != static_cast<size_t>(dims.front()))
    throw ConfigError("actor forward: feature length " + std::to_string(features.size()) +
                      " does not match input dim " + std::to_string(dims.front()));
  std::vector<double> act(features.begin(), features.end());
  const size_t n_layers = weights.size();
  for (size_t l = 0; l < n_layers; ++l) {
    const int in = dims[l], out = dims[l + 1];
    std::vector<double> next(out);
    for (int o = 0; o < out; ++o) {
      double v = biases[l][o];
      const double* row = &weights[l][static_cast<size_t>(o) * in];
      for (int i = 0; i < in; ++i) v += row[i] * act[i];
      next[o] = l + 1 < n_layers ? std::max(v, 0.0) : clamp_output(sigmoid(v));
    }
    act = std::move(next);
  }
  return act;
}

FeatureScaling FeatureScaling::defaults(const SystemConfig& cfg) {
  FeatureScaling s;
  s.gain_scale = cfg.mean_gain;
  s.arrival_scale = std::max(cfg.arrival_rate, 1.0);
  s.queue_scale = 10.0 * std::max(cfg.arrival_rate, 1.0);
  s.energy_scale = 10.0;
  return s;
}

std::vector<double> featurize(const SystemConfig& cfg, const SlotObservation& obs,
                              ScoreMode mode, const FeatureScaling& scaling) {
  const int n = cfg.n_devices;
  std::vector<double> f;
  f.reserve(mode == ScoreMode::wpt ? n : 4 * n);
  for (int i = 0; i < n; ++i) f.push_back(obs.gains[i] / scaling.gain_scale[i]);
  if (mode == ScoreMode::lyapunov) {
    for (int i = 0; i < n; ++i) f.push_back(obs.arrivals[i] / scaling.arrival_scale);
    for (int i = 0; i < n; ++i) f.push_back(obs.queues.data_q[i] / scaling.queue_scale);
    for (int i = 0; i < n; ++i) f.push_back(obs.queues.energy_q[i] / scaling.energy_scale);
  }
  return f;
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be >= 1");
  features_.resize(capacity);
  labels_.resize(capacity);
}

void ReplayMemory::push(std::vector<double> features, std::vector<uint8_t> label) {
  features_[cursor_] = std::move(features);
  labels_[cursor_] = std::move(label);
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t batch, Rng& rng) const {
  std::vector<std::size_t> idx(size_);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: first `batch` slots become a uniform sample
  // without replacement.
  for (std::size_t i = 0; i < batch && i < size_; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.integer(size_ - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(std::min(batch, size_));
  return idx;
}

void TrainConfig::validate(std::size_t replay_capacity) const {
  if (batch_size < 1 || static_cast<std::size_t>(batch_size) > replay_capacity)
    throw ConfigError("batch_size must be in [1, replay capacity]");
  if (train_interval < 1) throw ConfigError("train_interval must be >= 1");
  if (k_adapt_interval < 1) throw ConfigError("k_adapt_interval must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(noise_sigma >= 0)) throw ConfigError("noise_sigma must be >= 0");
}

std::vector<std::vector<uint8_t>> quantize(const std::vector<double>& xhat, int k,
                                           QuantizerKind kind, double noise_sigma,
                                           Rng* rng) {
  const int n = static_cast<int>(xhat.size());
  if (k < 1 || k > n + 1)
    throw ConfigError("quantize: K must lie in [1, N + 1], got " + std::to_string(k));
  for (double v : xhat)
    if (!(v > 0.0 && v < 1.0))
      throw ConfigError("quantize: relaxed decision entries must lie in (0, 1)");
  if (kind == QuantizerKind::noisy && rng == nullptr)
    throw ConfigError("quantize: noisy variant needs a random stream");

  auto hard = [n](const std::vector<double>& v) {
    std::vector<uint8_t> x(n);
    for (int i = 0; i < n; ++i) x[i] = v[i] > 0.5 ? 1 : 0;
    return x;
  };
  // Indices by distance from 0.5, ascending; ties by lower index.
  auto order = [n](const std::vector<double>& v) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return std::abs(v[a] - 0.5) < std::abs(v[b] - 0.5);
    });
    return idx;
  };
  auto pivot_candidate = [n](const std::vector<double>& v, double pivot) {
    std::vector<uint8_t> x(n);
    for (int i = 0; i < n; ++i)
      x[i] = (v[i] > pivot || (v[i] == pivot && pivot <= 0.5)) ? 1 : 0;
    return x;
  };

  std::vector<std::vector<uint8_t>> out;
  out.reserve(k);
  out.push_back(hard(xhat));
  std::vector<int> sorted = order(xhat);
  std::vector<double> noised(n);
  for (int j = 1; j < k; ++j) {
    const std::vector<double>* src = &xhat;
    const std::vector<int>* ord = &sorted;
    std::vector<int> noised_order;
    if (kind == QuantizerKind::noisy) {
      for (int i = 0; i < n; ++i) {
        double logit = std::log(xhat[i] / (1.0 - xhat[i]));
        noised[i] = clamp_output(sigmoid(logit + rng->normal(noise_sigma)));
      }
      noised_order = order(noised);
      src = &noised;
      ord = &noised_order;
    }
    double pivot = (*src)[(*ord)[j - 1]];
    out.push_back(pivot_candidate(*src, pivot));
  }
  return out;
}

AdamState AdamState::init(const ActorModel& model) {
  AdamState s;
  s.m.assign(model.param_count(), 0.0);
  s.v.assign(model.param_count(), 0.0);
  return s;
}

namespace {

// Forward keeping pre-activations, then backprop of the mean cross-entropy.
// Gradients accumulate into `grad` (same flat layout as AdamState); returns
// the loss of this sample. Labels may be fractional for diagnostics.
double backprop_sample(const ActorModel& model, std::span<const double> features,
                       std::span<const double> label, double weight,
                       std::vector<double>* grad) {
  const size_t n_layers = model.weights.size();
  std::vector<std::vector<double>> acts(n_layers + 1);
  acts[0].assign(features.begin(), features.end());
  std::vector<std::vector<double>> pre(n_layers);
  for (size_t l = 0; l < n_layers; ++l) {
    const int in = model.dims[l], out = model.dims[l + 1];
    pre[l].resize(out);
    acts[l + 1].resize(out);
    for (int o = 0; o < out; ++o) {
      double v = model.biases[l][o];
      const double* row = &model.weights[l][static_cast<size_t>(o) * in];
      for (int i = 0; i < in; ++i) v += row[i] * acts[l][i];
      pre[l][o] = v;
      acts[l + 1][o] = l + 1 < n_layers ? std::max(v, 0.0) : sigmoid(v);
    }
  }

  const int n_out = model.dims.back();
  double loss = 0.0;
  std::vector<double> delta(n_out);
  for (int o = 0; o < n_out; ++o) {
    double yhat = clamp_output(acts[n_layers][o]);
    double y = label[o];
    loss += -(y * std::log(yhat) + (1.0 - y) * std::log(1.0 - yhat));
    // d(mean BCE)/d(logit) through the sigmoid.
    delta[o] = (acts[n_layers][o] - y) / n_out * weight;
  }
  loss /= n_out;

  if (grad) {
    std::vector<size_t> w_off(n_layers), b_off(n_layers);
    size_t pos = 0;
    for (size_t l = 0; l < n_layers; ++l) {
      w_off[l] = pos;
      pos += model.weights[l].size();
      b_off[l] = pos;
      pos += model.biases[l].size();
    }
    std::vector<double> cur = delta;
    for (size_t l = n_layers; l-- > 0;) {
      const int in = model.dims[l], out = model.dims[l + 1];
      for (int o = 0; o < out; ++o) {
        (*grad)[b_off[l] + o] += cur[o];
        double* grow = &(*grad)[w_off[l] + static_cast<size_t>(o) * in];
        for (int i = 0; i < in; ++i) grow[i] += cur[o] * acts[l][i];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      for (int o = 0; o < out; ++o) {
        const double* row = &model.weights[l][static_cast<size_t>(o) * in];
        for (int i = 0; i < in; ++i) prev[i] += row[i] * cur[o];
      }
      for (int i = 0; i < in; ++i)
        if (pre[l - 1][i] <= 0.0) prev[i] = 0.0;  // rectifier gate
      cur = std::move(prev);
    }
  }
  return loss;
}

void flat_params(ActorModel& model, std::vector<double*>* out) {
  out->clear();
  for (size_t l = 0; l < model.weights.size(); ++l) {
    for (double& v : model.weights[l]) out->push_back(&v);
    for (double& v : model.biases[l]) out->push_back(&v);
  }
}

}  // namespace

double sample_loss(const ActorModel& model, std::span<const double> features,
                   std::span<const uint8_t> label) {
  std::vector<double> y(label.begin(), label.end());
  return backprop_sample(model, features, y, 1.0, nullptr);
}

double train_step(ActorModel& model, AdamState& adam, const ReplayMemory& memory,
                  const TrainConfig& tc, Rng& rng) {
  if (memory.size() < static_cast<std::size_t>(tc.batch_size))
    return std::numeric_limits<double>::quiet_NaN();

  std::vector<std::size_t> batch = memory.sample_indices(tc.batch_size, rng);
  std::vector<double> grad(model.param_count(), 0.0);
  double loss = 0.0;
  const double w = 1.0 / static_cast<double>(batch.size());
  std::vector<double> y;
  for (std::size_t idx : batch) {
    const auto& label = memory.label(idx);
    y.assign(label.begin(), label.end());
    loss += backprop_sample(model, memory.features(idx), y, w, &grad);
  }
  loss *= w;

  adam.t += 1;
  const double bc1 = 1.0 - std::pow(tc.adam_beta1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(tc.adam_beta2, static_cast<double>(adam.t));
  std::vector<double*> params;
  flat_params(model, &params);
  for (size_t i = 0; i < params.size(); ++i) {
    adam.m[i] = tc.adam_beta1 * adam.m[i] + (1.0 - tc.adam_beta1) * grad[i];
    adam.v[i] = tc.adam_beta2 * adam.v[i] + (1.0 - tc.adam_beta2) * grad[i] * grad[i];
    double mhat = adam.m[i] / bc1;
    double vhat = adam.v[i] / bc2;
    *params[i] -= tc.learning_rate * mhat / (std::sqrt(vhat) + tc.adam_eps);
  }
  return loss;
}

double grad_check(const ActorModel& model, std::span<const double> features,
                  std::span<const uint8_t> label, double epsilon) {
  std::vector<double> y(label.begin(), label.end());
  std::vector<double> analytic(model.param_count(), 0.0);
  backprop_sample(model, features, y, 1.0, &analytic);

  ActorModel probe = model;
  std::vector<double*> params;
  flat_params(probe, &params);
  double max_rel = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    double saved = *params[i];
    *params[i] = saved + epsilon;
    double up = backprop_sample(probe, features, y, 1.0, nullptr);
    *params[i] = saved - epsilon;
    double dn = backprop_sample(probe, features, y, 1.0, nullptr);
    *params[i] = saved;
    double numeric = (up - dn) / (2.0 * epsilon);
    double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
  }
  return max_rel;
}

int KSchedule::adapt(int n_devices) {
  int max_idx = 0;
  for (int v : history) max_idx = std::max(max_idx, v);
  current_k = std::clamp(max_idx + 1, 1, n_devices + 1);
  history.clear();
  return current_k;
}

namespace {
constexpr const char* kCheckpointFormat = "actor-checkpoint-v1";
}

void checkpoint_save(const Checkpoint& ckpt, const std::string& path) {
  json doc;
  doc["format"] = kCheckpointFormat;
  doc["dims"] = ckpt.model.dims;
  doc["weights"] = ckpt.model.weights;
  doc["biases"] = ckpt.model.biases;
  doc["scaling"] = {{"gain_scale", ckpt.scaling.gain_scale},
                    {"arrival_scale", ckpt.scaling.arrival_scale},
                    {"queue_scale", ckpt.scaling.queue_scale},
                    {"energy_scale", ckpt.scaling.energy_scale}};
  doc["final_k"] = ckpt.final_k;
  std::ofstream out(path);
  if (!out) throw ConfigError("checkpoint: cannot write " + path);
  out << doc.dump(1) << "\n";
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("checkpoint: cannot read " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("checkpoint parse error: ") + e.what());
  }
  auto field = [&](const char* name) -> const json& {
    if (!doc.contains(name))
      throw ConfigError(std::string("checkpoint: missing field '") + name + "'");
    return doc[name];
  };
  if (field("format").get<std::string>() != kCheckpointFormat)
    throw ConfigError("checkpoint: unsupported format tag '" +
                      doc["format"].get<std::string>() + "'");
  Checkpoint ckpt;
  try {
    ckpt.model.dims = field("dims").get<std::vector<int>>();
    ckpt.model.weights = field("weights").get<std::vector<std::vector<double>>>();
    ckpt.model.biases = field("biases").get<std::vector<std::vector<double>>>();
    const json& sc = field("scaling");
    ckpt.scaling.gain_scale = sc.at("gain_scale").get<std::vector<double>>();
    ckpt.scaling.arrival_scale = sc.at("arrival_scale").get<double>();
    ckpt.scaling.queue_scale = sc.at("queue_scale").get<double>();
    ckpt.scaling.energy_scale = sc.at("energy_scale").get<double>();
    ckpt.final_k = field("final_k").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed field: ") + e.what());
  }
  const auto& dims = ckpt.model.dims;
  if (dims.size() < 2 || ckpt.model.weights.size() != dims.size() - 1 ||
      ckpt.model.biases.size() != dims.size() - 1)
    throw ConfigError("checkpoint: field 'dims' inconsistent with layer count");
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    if (ckpt.model.weights[l].size() !=
        static_cast<size_t>(dims[l]) * static_cast<size_t>(dims[l + 1]))
      throw ConfigError("checkpoint: field 'weights' layer " + std::to_string(l) +
                        " does not match dims");
    if (ckpt.model.biases[l].size() != static_cast<size_t>(dims[l + 1]))
      throw ConfigError("checkpoint: field 'biases' layer " + std::to_string(l) +
                        " does not match dims");
  }
  return ckpt;
}

}  // namespace mecsim
