#include "nsr/model/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "nsr/error.hpp"

namespace nsr::model {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw InvalidConfig("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw InvalidConfig("Adam epsilon must be positive");
  if (!(clip_norm >= 0.0)) throw InvalidConfig("clip_norm must be >= 0");
}

template <class T>
void adam_step(ParameterSet<T>& params, ParameterSet<T>& grads, AdamState<T>& state, const AdamConfig& c) {
  if (c.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& g : grads.values) sq += static_cast<double>(g.squaredNorm());
    const double norm = std::sqrt(sq);
    if (norm > c.clip_norm)
      for (auto& g : grads.values) g *= static_cast<T>(c.clip_norm / norm);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T step_size = static_cast<T>(c.learning_rate / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(c.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m.values[i];
    auto& v = state.v.values[i];
    const auto& g = grads.values[i];
    m = b1 * m + (T(1) - b1) * g;
    v.array() = b2 * v.array() + (T(1) - b2) * g.array().square();
    params.values[i].array() -= step_size * m.array() / (v.array().sqrt() * inv_sqrt_bc2 + eps);
  }
}

template void adam_step<float>(ParameterSet<float>&, ParameterSet<float>&, AdamState<float>&, const AdamConfig&);
template void adam_step<double>(ParameterSet<double>&, ParameterSet<double>&, AdamState<double>&, const AdamConfig&);

void write_trace_csv(const TrainingTrace& trace, std::ostream& out) {
  out << "step,train_loss,val_loss,wall_seconds\n";
  out.precision(9);
  for (const TraceRow& r : trace.rows) {
    out << r.step << ',' << r.train_loss << ',';
    if (!std::isnan(r.val_loss)) out << r.val_loss;
    out << ',' << r.wall_seconds << '\n';
  }
}

double evaluate_loss(const Network<float>& net, std::span<const datagen::TrainingBatch> batches, int threads) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& b : batches) {
    const LossResult r = batch_loss<float>(net, b, nullptr, threads);
    total += r.per_token * static_cast<double>(r.tokens);
    tokens += r.tokens;
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

TrainingTrace train(const ModelConfig& config, ParameterSet<float>& params, AdamState<float>& adam,
                    const BatchSource& source, std::span<const datagen::TrainingBatch> validation,
                    const TrainConfig& tc, const AdamConfig& ac) {
  ac.validate();
  if (tc.steps < 0) throw InvalidConfig("steps must be >= 0");
  if (tc.log_every < 1) throw InvalidConfig("log_every must be >= 1");
  if (adam.m.size() != params.size()) adam = AdamState<float>::for_params(params);
  const Network<float> net(config, params);
  // A resumed run draws from its own stream instead of replaying the first batches.
  Rng rng = adam.step == 0 ? split_stream(tc.seed, 1) : split_stream(tc.seed, 0x100000000ULL + static_cast<std::uint64_t>(adam.step));
  ParameterSet<float> grads = params.zeros_like();
  ParameterSet<float> best;
  TrainingTrace trace;
  trace.best_val_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  const int first = static_cast<int>(adam.step);
  double interval_loss = 0.0;
  int interval_count = 0;
  for (int local = 1; local <= tc.steps; ++local) {
    const int step = first + local;
    const bool last = local == tc.steps;
    const datagen::TrainingBatch batch = source(rng);
    grads.set_zero();
    const LossResult r = batch_loss<float>(net, batch, &grads, tc.threads);
    if (!grads.all_finite()) throw NonFiniteLoss("non-finite gradient at step " + std::to_string(step));
    adam_step(params, grads, adam, ac);

    interval_loss += r.per_token;
    ++interval_count;
    TraceRow row{step, interval_loss / interval_count, std::numeric_limits<double>::quiet_NaN(), 0.0};
    const bool validate = !validation.empty() && tc.validate_every > 0 &&
                          (step % tc.validate_every == 0 || last);
    if (validate) {
      row.val_loss = evaluate_loss(net, validation, tc.threads);
      if (!std::isfinite(row.val_loss)) throw NonFiniteLoss("non-finite validation loss at step " + std::to_string(step));
      if (row.val_loss < trace.best_val_loss) {
        trace.best_val_loss = row.val_loss;
        trace.best_step = step;
        since_best = 0;
        if (tc.keep_best) best = params;
      } else {
        ++since_best;
      }
    }
    row.wall_seconds = elapsed();
    const bool stop = (validate && tc.patience > 0 && since_best >= tc.patience) ||
                      (tc.max_seconds > 0.0 && row.wall_seconds >= tc.max_seconds);
    if (validate || last || stop || step % tc.log_every == 0) {
      trace.rows.push_back(row);
      if (tc.on_row) tc.on_row(row);
      interval_loss = 0.0;
      interval_count = 0;
    }
    if (stop) {
      trace.stopped_early = true;
      break;
    }
  }
  if (tc.keep_best && trace.best_step >= 0) params = std::move(best);
  return trace;
}

TrainingTrace train(const ModelConfig& config, ParameterSet<float>& params, AdamState<float>& adam,
                    const datagen::SkeletonPool& pool, const datagen::BatchSpec& spec,
                    const datagen::SkeletonPool* validation_pool, int validation_batches, const TrainConfig& tc,
                    const AdamConfig& ac) {
  spec.validate();
  std::vector<datagen::TrainingBatch> validation;
  if (validation_pool && !validation_pool->empty()) {
    Rng vrng = split_stream(tc.seed, 2);
    for (int i = 0; i < validation_batches; ++i) validation.push_back(datagen::assemble_batch(*validation_pool, spec, vrng));
  }
  const BatchSource source = [&](Rng& rng) { return datagen::assemble_batch(pool, spec, rng); };
  return train(config, params, adam, source, validation, tc, ac);
}

}  // namespace nsr::model
