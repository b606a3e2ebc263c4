#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mecsim/critic.hpp"
#include "mecsim/model.hpp"
#include "mecsim/rng.hpp"

namespace mecsim {

// Fully-connected network with rectifier hidden layers and a logistic
// output layer. Weights are row-major (out x in). Outputs are clamped to
// (kOutputEps, 1 - kOutputEps) so they are strictly inside (0, 1) and safe
// to take logs of.
struct ActorModel {
  static constexpr double kOutputEps = 1e-12;

  std::vector<int> dims;  // [input, hidden..., N]
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  // Symmetric uniform init scaled by fan-in.
  static ActorModel init(const std::vector<int>& dims, Rng& rng);

  std::vector<double> forward(std::span<const double> features) const;
  int param_count() const;
  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
};

// Divisors applied per feature group so typical inputs are O(1).
struct FeatureScaling {
  std::vector<double> gain_scale;  // per device, default mean_gain
  double arrival_scale = 1.0;
  double queue_scale = 1.0;
  double energy_scale = 1.0;

  static FeatureScaling defaults(const SystemConfig& cfg);
};

// wpt mode: N scaled gains. lyapunov mode: 4N features
// (scaled gains, arrivals, data queues, energy queues).
std::vector<double> featurize(const SystemConfig& cfg, const SlotObservation& obs,
                              ScoreMode mode, const FeatureScaling& scaling);

// Fixed-capacity circular store of labeled (features, decision) samples;
// overwrite order is strictly oldest-first.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(std::vector<double> features, std::vector<uint8_t> label);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  const std::vector<double>& features(std::size_t i) const { return features_[i]; }
  const std::vector<uint8_t>& label(std::size_t i) const { return labels_[i]; }

  // batch distinct indices, uniform without replacement.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::vector<double>> features_;
  std::vector<std::vector<uint8_t>> labels_;
};

enum class QuantizerKind { order_preserving, noisy };

struct TrainConfig {
  int batch_size = 128;
  int train_interval = 10;  // delta, slots between policy updates
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  QuantizerKind quantizer_kind = QuantizerKind::order_preserving;
  double noise_sigma = 0.1;
  int k_adapt_interval = 32;  // Delta_K, decisions between K updates

  void validate(std::size_t replay_capacity) const;
};

// K binary candidates from the relaxed decision xhat.
// Candidate 1 is the hard 0.5 threshold. Remaining candidates threshold at
// the k-th entry closest to 0.5 (ties by lower index): x_i = 1 iff
// xhat_i > v, or xhat_i = v and v <= 0.5. The noisy variant applies the
// same rule to logistic(logit(xhat) + gaussian noise), redrawn per
// candidate beyond the first. Duplicates are not removed.
std::vector<std::vector<uint8_t>> quantize(const std::vector<double>& xhat, int k,
                                           QuantizerKind kind, double noise_sigma,
                                           Rng* rng);

// Adam moment buffers, one entry per model parameter.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;

  static AdamState init(const ActorModel& model);
};

// One training step: samples a batch, takes one Adam step on the averaged
// cross-entropy loss, returns the pre-update loss. Returns NaN (no-op) when
// the memory holds fewer than batch_size samples.
double train_step(ActorModel& model, AdamState& adam, const ReplayMemory& memory,
                  const TrainConfig& tc, Rng& rng);

// Mean cross-entropy of the model on one labeled sample.
double sample_loss(const ActorModel& model, std::span<const double> features,
                   std::span<const uint8_t> label);

// Max relative error between backpropagated gradients and central finite
// differences at step epsilon, over every parameter. Small models only.
double grad_check(const ActorModel& model, std::span<const double> features,
                  std::span<const uint8_t> label, double epsilon);

// Adaptive candidate count: K' = clamp(max 1-based chosen index in the
// window + 1, 1, N + 1); the window is cleared by adapt.
struct KSchedule {
  int current_k;
  std::vector<int> history;  // 1-based chosen-candidate indices

  explicit KSchedule(int k_init) : current_k(k_init) {}
  void record(int chosen_index_1based) { history.push_back(chosen_index_1based); }
  int adapt(int n_devices);
};

// Versioned JSON checkpoint: dims, row-major weights, biases, feature
// scaling, and the K the run had converged to. Round-trips bit-identically.
struct Checkpoint {
  ActorModel model;
  FeatureScaling scaling;
  int final_k = 1;
};

void checkpoint_save(const Checkpoint& ckpt, const std::string& path);
Checkpoint checkpoint_load(const std::string& path);  // throws ConfigError

}  // namespace mecsim
