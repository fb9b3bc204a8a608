// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wig/dataset.hpp"
#include "wig/model.hpp"
#include "wig/types.hpp"

namespace wig {

enum class Optimizer { RMSPROP, ADAM };

std::string to_string(Optimizer opt);
Optimizer optimizer_from_string(const std::string& name);

struct TrainConfig {
  int epochs = 1000;
  Optimizer optimizer = Optimizer::RMSPROP;
  double lr0 = 5e-4;
  double lr_decay = 0.9;  ///< multiplied into the rate every decay_every epochs
  int decay_every = 100;  ///< RMSprop only; Adam runs undecayed
  std::uint64_t seed = 0; ///< model-init seed; training itself is deterministic
  int train_size = 100;
  int test_size = 500;
  /// Divide H by the training set's RMS before feeding the model.
  bool standardize_input = false;

  void validate() const;
  /// Per-kind defaults: the GNNs use RMSprop at 5e-4 with 0.9 decay, the
  /// fully-connected net Adam at 1e-3 without decay.
  static TrainConfig defaults_for(ModelKind kind);
};

/// Per-group optimizer state; RMSprop uses s, Adam uses m/v/t.
struct OptState {
  Matrix s, m, v;
  int t = 0;
};

/// One parameter update. RMSprop: s <- 0.9 s + 0.1 g^2, theta -= lr g/(sqrt(s)+1e-8).
/// Adam: bias-corrected moments with beta1=0.9, beta2=0.999, eps=1e-8.
void optimizer_step(Matrix& theta, const Matrix& grad, OptState& state, Optimizer opt, double lr);

struct TrainResult {
  std::vector<double> mse_history;  ///< one entry per epoch
};

/// Compares reverse-mode gradients of the batch MSE against central finite
/// differences on `n_params` randomly chosen parameter coordinates (without
/// replacement; clamped to the model's coordinate count). Returns the maximum
/// relative error |analytic - numeric| / max(|analytic|, |numeric|, 1e-6);
/// the 1e-6 floor turns near-zero gradients into an absolute comparison.
double gradient_check(const Model& model, const std::vector<LabeledSample>& samples,
                      int n_params, std::uint64_t seed, double eps = 1e-5);

/// Full-batch gradient descent on the normalized-power MSE: each epoch runs
/// one forward/backward over the whole set and one optimizer step. Throws
/// std::runtime_error naming the epoch if the loss goes non-finite, and
/// std::invalid_argument with a config diff if the dataset does not match the
/// model. Deterministic given the model and data.
TrainResult train(Model& model, const Dataset& train_set, const TrainConfig& tc);

/// Mean over samples of sum_rate(H, model(p_max, H)) / label rate. Degenerate
/// samples (zero label rate) are excluded with a warning on stderr. Raw means
/// are reported; values slightly above 1 are possible and not clipped.
double performance_ratio(const Model& model, const Dataset& test_set);

/// Wall-clock seconds for n sequential single-instance inferences, cycling
/// through `inputs`, after one warm-up pass.
double runtime_bench(const Model& model, const Dataset& inputs, int n = 1000);
/// Wall-clock seconds for n sequential WMMSE solves over the same inputs.
double wmmse_bench(const Dataset& inputs, const WmmseOptions& opts, int n = 1000);

struct EvalReport {
  std::string model_kind;
  NetworkConfig cfg;
  std::vector<double> mse_history;
  double perf_ratio = 0.0;
  int param_count = 0;
  double inference_time_1000 = 0.0;
  std::uint64_t model_seed = 0;
  std::uint64_t data_seed = 0;
  int train_size = 0;
  int test_size = 0;
};

void save_report_json(const EvalReport& report, const std::string& path);
/// One CSV row per epoch: epoch,mse.
void save_report_csv(const EvalReport& report, const std::string& path);

/// One trained model in a sample-complexity sweep.
struct SweepCell {
  ModelKind kind;
  int train_size = 0;
  int rep = 0;
  std::uint64_t model_seed = 0;
  double perf_ratio = 0.0;
  double final_mse = 0.0;
};

/// Trains a fresh model per (size, repetition) on nested prefixes of `pool`
/// and evaluates each on `test_set`. Model seeds derive from tc.seed and the
/// cell ordinal, so the result is independent of `jobs` (which only bounds
/// the number of worker threads).
std::vector<SweepCell> sweep(ModelKind kind, const Dataset& pool, const Dataset& test_set,
                             const std::vector<int>& sizes, const TrainConfig& tc,
                             int reps_per_size = 3, int jobs = 1);

/// Smallest size whose mean ratio over its repetitions reaches `target`;
/// -1 when none does.
int minimal_size(const std::vector<SweepCell>& cells, double target = 0.9);
void save_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path);

}  // namespace wig
