#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nsr/datagen/batch.hpp"
#include "nsr/expr/expression.hpp"
#include "nsr/model/config.hpp"
#include "nsr/model/tape.hpp"
#include "nsr/random.hpp"

namespace nsr::model {

/// Fan-in uniform projections, zero biases, unit layer-norm gains, and
/// N(0, 1/sqrt(H)) inducing points, seeds and embeddings.
template <class T>
ParameterSet<T> init_parameters(const ModelConfig& config, Rng& rng);

/// Column order of an encoded point block that sorts points by their bit
/// pattern; the encoder reads points in this order.
std::vector<int> canonical_point_order(std::span<const std::uint8_t> encoded, int n_points);

template <class T>
class Network {
 public:
  using Var = typename Tape<T>::Var;

  /// Keeps references to `params`; both must outlive the network.
  Network(const ModelConfig& config, const ParameterSet<T>& params);

  const ModelConfig& config() const { return config_; }
  const ParameterSet<T>& params() const { return *params_; }

  /// `encoded` is the row-major kEncodedRows x n_points bit block.
  Var encode(Tape<T>& tape, std::span<const std::uint8_t> encoded, int n_points) const;
  /// Logit row k predicts the token after prefix[k].
  Var decode(Tape<T>& tape, Var z, std::span<const expr::TokenId> prefix) const;

  Mat<T> encode(std::span<const std::uint8_t> encoded, int n_points) const;
  Mat<T> decode_logits(const Mat<T>& z, std::span<const expr::TokenId> prefix) const;

  /// Summed next-token cross-entropy of one framed target (sos ... eos).
  Var target_loss(Tape<T>& tape, Var z, std::span<const expr::TokenId> target) const;

 private:
  struct Attn {
    int wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct Ff {
    int w1, b1, w2, b2;
  };
  struct Ln {
    int gain, bias;
  };
  struct Mab {
    Attn attn;
    Ln ln0;
    Ff ff;
    Ln ln1;
  };
  struct Isab {
    int inducing;
    Mab mab0, mab1;
  };
  struct DecoderLayer {
    Attn self;
    Ln ln0;
    Attn cross;
    Ln ln1;
    Ff ff;
    Ln ln2;
  };

  Attn attn_indices(const std::string& prefix) const;
  Ff ff_indices(const std::string& prefix) const;
  Ln ln_indices(const std::string& prefix) const;
  Mab mab_indices(const std::string& prefix) const;

  Var attention(Tape<T>& t, const Attn& a, Var q, Var kv, bool causal) const;
  Var feed_forward(Tape<T>& t, const Ff& f, Var x) const;
  Var norm(Tape<T>& t, const Ln& l, Var x) const;
  Var mab(Tape<T>& t, const Mab& m, Var q, Var k) const;

  ModelConfig config_;
  const ParameterSet<T>* params_;
  int input_w_, input_b_;
  std::vector<Isab> isabs_;
  int seeds_;
  Mab pma_;
  int tok_emb_, pos_emb_;
  std::vector<DecoderLayer> layers_;
  int out_w_, out_b_;
};

struct LossResult {
  double loss = 0.0;        // mean over examples of summed token cross-entropy
  double per_token = 0.0;   // total cross-entropy / scored tokens
  std::size_t tokens = 0;
};

/// Forward and (when `grads` is given) backward over a batch. Gradients are
/// of `loss` and are accumulated in example order, so the result does not
/// depend on `threads`. Throws NonFiniteLoss.
template <class T>
LossResult batch_loss(const Network<T>& net, const datagen::TrainingBatch& batch, ParameterSet<T>* grads,
                      int threads = 1);

extern template class Network<float>;
extern template class Network<double>;

}  // namespace nsr::model
