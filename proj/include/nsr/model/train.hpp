#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "nsr/datagen/batch.hpp"
#include "nsr/model/network.hpp"

namespace nsr::model {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clipping; 0 disables it.
  double clip_norm = 0.0;

  void validate() const;
};

template <class T>
struct AdamState {
  ParameterSet<T> m;
  ParameterSet<T> v;
  std::int64_t step = 0;

  static AdamState for_params(const ParameterSet<T>& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

template <class T>
void adam_step(ParameterSet<T>& params, ParameterSet<T>& grads, AdamState<T>& state, const AdamConfig& config);

struct TraceRow {
  int step = 0;
  double train_loss = 0.0;  // nats per token
  double val_loss = 0.0;    // NaN when not validated at this step
  double wall_seconds = 0.0;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;
  int best_step = -1;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

/// step,train_loss,val_loss,wall_seconds; val_loss is empty when absent.
void write_trace_csv(const TrainingTrace& trace, std::ostream& out);

struct TrainConfig {
  int steps = 1000;
  int log_every = 1;         // one trace row per interval (mean train loss over it), plus validation steps
  int validate_every = 100;  // 0 disables validation
  bool keep_best = true;     // restore the best-validation parameters at the end
  int patience = 0;          // stop after this many validations without improvement; 0 disables
  int threads = 1;
  std::uint64_t seed = 0;
  double max_seconds = 0.0;  // wall-clock cap; 0 disables
  std::function<void(const TraceRow&)> on_row;
};

using BatchSource = std::function<datagen::TrainingBatch(Rng&)>;

/// Adam on freshly drawn batches. Step numbers continue from adam.step, so a
/// resumed run extends the trace of the original. Throws NonFiniteLoss.
TrainingTrace train(const ModelConfig& config, ParameterSet<float>& params, AdamState<float>& adam,
                    const BatchSource& source, std::span<const datagen::TrainingBatch> validation,
                    const TrainConfig& train_config, const AdamConfig& adam_config);

/// Mean nats/token over a set of batches.
double evaluate_loss(const Network<float>& net, std::span<const datagen::TrainingBatch> batches, int threads = 1);

/// Batches drawn from `pool`; validation uses `validation_batches` fixed
/// batches from `validation_pool` (skipped when null).
TrainingTrace train(const ModelConfig& config, ParameterSet<float>& params, AdamState<float>& adam,
                    const datagen::SkeletonPool& pool, const datagen::BatchSpec& spec,
                    const datagen::SkeletonPool* validation_pool, int validation_batches,
                    const TrainConfig& train_config, const AdamConfig& adam_config);

}  // namespace nsr::model
