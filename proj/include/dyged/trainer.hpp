#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dyged/evaluator.hpp"
#include "dyged/graph.hpp"
#include "dyged/model.hpp"
#include "dyged/text.hpp"

namespace dyged {

struct AdamConfig {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double lr = 0.005;
  double dropout = 0.2;
  std::size_t batch_size = 100;
  std::size_t epochs = 100;
  std::size_t k = 3;
  std::uint64_t seed = 0;
  Variant variant = Variant::full;
  FeatureMode feature_mode = FeatureMode::static_only;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t hidden = 64;
  std::size_t embed = 64;
  std::size_t mlp_layers = 2;

  void validate() const;
  ModelConfig model_config(std::size_t d_in) const;
  AdamConfig adam() const { return AdamConfig{lr, beta1, beta2, eps}; }
};

/// Experiment = training config plus the cross-validation protocol.
struct ExperimentConfig {
  TrainConfig train;
  std::size_t folds = 5;
  std::size_t repetitions = 1;
  std::size_t jobs = 1;
  std::string dataset;
};

/// Unknown keys are a config error; every key is optional.
ExperimentConfig parse_experiment_config(const text::KeyValues& kv);
/// key=value text listing every field (round-trips through parse).
std::string echo_config(const ExperimentConfig& config);

/// Graph plus its per-snapshot Â and assembled features.
struct Dataset {
  DynamicGraph graph;
  FeatureMode mode = FeatureMode::static_only;
  std::vector<PreparedSnapshot> prepared;

  std::size_t feature_dim() const { return prepared.empty() ? 0 : prepared.front().features.cols(); }
  std::span<const PreparedSnapshot> window(std::size_t t, std::size_t k) const;
};

Dataset make_dataset(DynamicGraph graph, FeatureMode mode);

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;
};

AdamState make_adam_state(const ModelParams& params);
/// Bias-corrected Adam update applied in place.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamConfig& cfg);

struct WindowGradient {
  double loss = 0.0;
  std::vector<Matrix> grads;  // aligned with ModelParams::tensors()
};

/// Loss and parameter gradients for a single window.
WindowGradient window_gradient(const ModelParams& params, std::span<const PreparedSnapshot> window,
                               int label, double positive_ratio, Mode mode, std::mt19937_64* rng);

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_trace;  // mean mini-batch loss per epoch
};

/// Trains on the windows ending at `train_t` (each t ≥ k).
TrainResult train(const Dataset& data, std::span<const std::size_t> train_t, const TrainConfig& cfg);

/// Starts from `init` instead of fresh parameters.
TrainResult train(const Dataset& data, std::span<const std::size_t> train_t, const TrainConfig& cfg,
                  ModelParams init);

/// Eval-mode scores and diagnostics for the windows ending at `ts`.
EvalReport evaluate(const ModelParams& params, const Dataset& data, std::span<const std::size_t> ts);

/// Contiguous folds over window indices 0..count-1 (half-open ranges).
struct Fold {
  std::size_t train_begin = 0;
  std::size_t train_end = 0;
  std::size_t test_begin = 0;
  std::size_t test_end = 0;
};

struct FoldSpec {
  std::vector<Fold> folds;
};

/// Growing-window nested folds: the first ⌊count/2⌋ windows only ever train;
/// the rest is cut into p contiguous test blocks (sizes differ by at most 1,
/// larger blocks first), and fold i trains on everything before block i.
FoldSpec make_folds(std::size_t count, std::size_t p);

struct FoldRun {
  std::size_t fold = 0;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  double positive_ratio = 0.0;
  std::vector<double> loss_trace;
  EvalReport report;
};

struct ExperimentResult {
  std::vector<FoldRun> runs;
  double mean_auc = 0.0;
  double stdev_auc = 0.0;
  std::size_t auc_count = 0;  // runs whose test block held both classes
};

/// Independent RNG stream for one (fold, repetition) pair.
std::uint64_t derive_seed(std::uint64_t seed, std::size_t fold, std::size_t repetition);

ExperimentResult run_experiment(const Dataset& data, const ExperimentConfig& config);

}  // namespace dyged
