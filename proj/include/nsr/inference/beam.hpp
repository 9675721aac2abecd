#pragma once

#include <optional>
#include <vector>

#include "nsr/datagen/batch.hpp"
#include "nsr/expr/expression.hpp"
#include "nsr/model/network.hpp"
#include "nsr/optim/bfgs.hpp"

namespace nsr::inference {

struct InferenceConfig {
  int beam_size = 32;
  int bfgs_restarts = 4;
  double token_penalty = 1e-14;
  int max_decode_len = 0;  // 0: the model's max_target_len
  datagen::Interval restart_init_range{-3.0, 3.0};
  std::uint64_t seed = 0;
  int threads = 1;
  optim::BfgsConfig bfgs;

  /// Throws InvalidConfig.
  void validate() const;
};

struct Candidate {
  expr::Skeleton skeleton;
  std::vector<expr::TokenId> tokens;  // framed: sos ... eos
  double log_likelihood = 0.0;
  std::optional<expr::Expression> fitted;
  std::optional<double> mse;
  std::optional<double> score;
  std::vector<double> constants;
  double fit_millis = 0.0;
};

struct BeamResult {
  std::vector<Candidate> candidates;                // parseable, sorted by log-likelihood
  std::vector<std::vector<expr::TokenId>> invalid;  // finished beams that failed to parse or never ended
};

/// Length-synchronized beam search from sos. Expansions are ranked by total
/// log-likelihood, ties by token order. Throws NoValidCandidate when nothing parses.
BeamResult beam_search(const model::Network<float>& net, const model::Mat<float>& z, const InferenceConfig& config);

/// Argmax decoding; the framed token sequence (possibly without eos when the
/// length limit is hit).
std::vector<expr::TokenId> greedy_decode(const model::Network<float>& net, const model::Mat<float>& z,
                                         int max_len = 0);

}  // namespace nsr::inference
