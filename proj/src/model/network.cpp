#include "nsr/model/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "nsr/error.hpp"

namespace nsr::model {

template <class T>
ParameterSet<T> init_parameters(const ModelConfig& config, Rng& rng) {
  ParameterSet<T> params;
  const double embed_sd = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
  for (const ParameterShape& s : parameter_layout(config)) {
    Mat<T> m(s.rows, s.cols);
    const auto ends_with = [&](std::string_view suffix) {
      return s.name.size() >= suffix.size() && s.name.compare(s.name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".gain")) {
      m.setOnes();
    } else if (ends_with(".inducing") || ends_with(".seeds") || ends_with("_emb")) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(embed_sd * normal(rng));
    } else if (s.rows == 1) {
      m.setZero();  // biases
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.rows));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(uniform(rng, -bound, bound));
    }
    params.add(s.name, std::move(m));
  }
  return params;
}

std::vector<int> canonical_point_order(std::span<const std::uint8_t> encoded, int n_points) {
  // The 64 bits of a point form one key: features x1, x2, x3, y, MSB first.
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(n_points), 0);
  for (int r = 0; r < datagen::kEncodedRows; ++r)
    for (int i = 0; i < n_points; ++i)
      keys[static_cast<std::size_t>(i)] =
          (keys[static_cast<std::size_t>(i)] << 1) | encoded[static_cast<std::size_t>(r) * n_points + i];
  std::vector<int> order(static_cast<std::size_t>(n_points));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)];
  });
  return order;
}

template <class T>
Network<T>::Network(const ModelConfig& config, const ParameterSet<T>& params) : config_(config), params_(&params) {
  config_.validate();
  const auto layout = parameter_layout(config_);
  if (layout.size() != params.size()) throw InvalidConfig("parameter set does not match the model config");
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].name != params.names[i] || layout[i].rows != params.values[i].rows() ||
        layout[i].cols != params.values[i].cols())
      throw InvalidConfig("parameter '" + params.names[i] + "' does not match the model config");

  input_w_ = params.index_of("enc.input.w");
  input_b_ = params.index_of("enc.input.b");
  for (int i = 0; i < config_.num_isab; ++i) {
    const std::string p = "enc.isab" + std::to_string(i);
    isabs_.push_back({params.index_of(p + ".inducing"), mab_indices(p + ".mab0"), mab_indices(p + ".mab1")});
  }
  seeds_ = params.index_of("enc.pma.seeds");
  pma_ = mab_indices("enc.pma.mab");
  tok_emb_ = params.index_of("dec.tok_emb");
  pos_emb_ = params.index_of("dec.pos_emb");
  for (int i = 0; i < config_.decoder_layers; ++i) {
    const std::string p = "dec.layer" + std::to_string(i);
    layers_.push_back({attn_indices(p + ".self"), ln_indices(p + ".ln0"), attn_indices(p + ".cross"),
                       ln_indices(p + ".ln1"), ff_indices(p + ".ff"), ln_indices(p + ".ln2")});
  }
  out_w_ = params.index_of("dec.out.w");
  out_b_ = params.index_of("dec.out.b");
}

template <class T>
typename Network<T>::Attn Network<T>::attn_indices(const std::string& p) const {
  const auto& ps = *params_;
  return {ps.index_of(p + ".wq"), ps.index_of(p + ".bq"), ps.index_of(p + ".wk"), ps.index_of(p + ".bk"),
          ps.index_of(p + ".wv"), ps.index_of(p + ".bv"), ps.index_of(p + ".wo"), ps.index_of(p + ".bo")};
}

template <class T>
typename Network<T>::Ff Network<T>::ff_indices(const std::string& p) const {
  const auto& ps = *params_;
  return {ps.index_of(p + ".w1"), ps.index_of(p + ".b1"), ps.index_of(p + ".w2"), ps.index_of(p + ".b2")};
}

template <class T>
typename Network<T>::Ln Network<T>::ln_indices(const std::string& p) const {
  return {params_->index_of(p + ".gain"), params_->index_of(p + ".bias")};
}

template <class T>
typename Network<T>::Mab Network<T>::mab_indices(const std::string& p) const {
  return {attn_indices(p + ".attn"), ln_indices(p + ".ln0"), ff_indices(p + ".ff"), ln_indices(p + ".ln1")};
}

template <class T>
typename Network<T>::Var Network<T>::attention(Tape<T>& t, const Attn& a, Var q, Var kv, bool causal) const {
  const Var Q = t.add_row(t.matmul(q, t.param(a.wq)), t.param(a.bq));
  const Var K = t.add_row(t.matmul(kv, t.param(a.wk)), t.param(a.bk));
  const Var V = t.add_row(t.matmul(kv, t.param(a.wv)), t.param(a.bv));
  const int dh = config_.head_dim();
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<Var> heads;
  for (int h = 0; h < config_.num_heads; ++h) {
    const bool whole = config_.num_heads == 1;
    const Var qh = whole ? Q : t.col_slice(Q, h * dh, dh);
    const Var kh = whole ? K : t.col_slice(K, h * dh, dh);
    const Var vh = whole ? V : t.col_slice(V, h * dh, dh);
    const Var p = t.softmax_rows(t.scale(t.matmul_nt(qh, kh), inv_sqrt), causal);
    heads.push_back(t.matmul(p, vh));
  }
  const Var o = heads.size() == 1 ? heads.front() : t.concat_cols(heads);
  return t.add_row(t.matmul(o, t.param(a.wo)), t.param(a.bo));
}

template <class T>
typename Network<T>::Var Network<T>::feed_forward(Tape<T>& t, const Ff& f, Var x) const {
  const Var h = t.gelu(t.add_row(t.matmul(x, t.param(f.w1)), t.param(f.b1)));
  return t.add_row(t.matmul(h, t.param(f.w2)), t.param(f.b2));
}

template <class T>
typename Network<T>::Var Network<T>::norm(Tape<T>& t, const Ln& l, Var x) const {
  return t.layer_norm(x, t.param(l.gain), t.param(l.bias));
}

// MAB(Q, K) = LN(A + FF(A)), A = LN(Q + Attn(Q, K, K)).
template <class T>
typename Network<T>::Var Network<T>::mab(Tape<T>& t, const Mab& m, Var q, Var k) const {
  const Var a = norm(t, m.ln0, t.add(q, attention(t, m.attn, q, k, false)));
  return norm(t, m.ln1, t.add(a, feed_forward(t, m.ff, a)));
}

template <class T>
typename Network<T>::Var Network<T>::encode(Tape<T>& t, std::span<const std::uint8_t> encoded, int n) const {
  if (n < 1) throw InvalidConfig("encoder needs at least one point");
  const std::vector<int> order = canonical_point_order(encoded, n);
  Mat<T> x(n, datagen::kEncodedRows);
  for (int r = 0; r < datagen::kEncodedRows; ++r)
    for (int i = 0; i < n; ++i)
      x(i, r) = static_cast<T>(encoded[static_cast<std::size_t>(r) * n + order[static_cast<std::size_t>(i)]]);
  Var h = t.add_row(t.matmul(t.input(std::move(x)), t.param(input_w_)), t.param(input_b_));
  for (const Isab& isab : isabs_) {
    const Var induced = mab(t, isab.mab0, t.param(isab.inducing), h);
    h = mab(t, isab.mab1, h, induced);
  }
  return mab(t, pma_, t.param(seeds_), h);
}

template <class T>
typename Network<T>::Var Network<T>::decode(Tape<T>& t, Var z, std::span<const expr::TokenId> prefix) const {
  const int len = static_cast<int>(prefix.size());
  if (len < 1 || len > config_.max_target_len) throw InvalidConfig("decoder prefix length out of range");
  std::vector<int> tokens(prefix.begin(), prefix.end());
  for (int tok : tokens)
    if (tok < 0 || tok >= config_.vocab_size) throw InvalidConfig("token id out of range");
  std::vector<int> positions(static_cast<std::size_t>(len));
  std::iota(positions.begin(), positions.end(), 0);
  Var h = t.add(t.gather_rows(t.param(tok_emb_), std::move(tokens)), t.gather_rows(t.param(pos_emb_), std::move(positions)));
  for (const DecoderLayer& l : layers_) {
    h = norm(t, l.ln0, t.add(h, attention(t, l.self, h, h, true)));
    h = norm(t, l.ln1, t.add(h, attention(t, l.cross, h, z, false)));
    h = norm(t, l.ln2, t.add(h, feed_forward(t, l.ff, h)));
  }
  return t.add_row(t.matmul(h, t.param(out_w_)), t.param(out_b_));
}

template <class T>
Mat<T> Network<T>::encode(std::span<const std::uint8_t> encoded, int n) const {
  Tape<T> t(*params_);
  return t.value(encode(t, encoded, n));
}

template <class T>
Mat<T> Network<T>::decode_logits(const Mat<T>& z, std::span<const expr::TokenId> prefix) const {
  Tape<T> t(*params_);
  return t.value(decode(t, t.input(z), prefix));
}

template <class T>
typename Network<T>::Var Network<T>::target_loss(Tape<T>& t, Var z, std::span<const expr::TokenId> target) const {
  if (target.size() < 2) throw InvalidConfig("target must contain at least sos and one token");
  const Var logits = decode(t, z, target.first(target.size() - 1));
  return t.cross_entropy(logits, std::vector<int>(target.begin() + 1, target.end()));
}

namespace {

std::span<const expr::TokenId> framed_target(const datagen::TrainingBatch& batch, int b) {
  const auto row = batch.target(b);
  std::size_t len = 0;
  while (len < row.size() && batch.target_mask[static_cast<std::size_t>(b) * batch.max_len + len]) ++len;
  return row.first(len);
}

}  // namespace

template <class T>
LossResult batch_loss(const Network<T>& net, const datagen::TrainingBatch& batch, ParameterSet<T>* grads,
                      int threads) {
  const int B = batch.batch_size;
  std::vector<double> losses(static_cast<std::size_t>(B), 0.0);
  std::vector<std::size_t> tokens(static_cast<std::size_t>(B), 0);
  const T weight = T(1) / static_cast<T>(B);

  const auto run_one = [&](int b, ParameterSet<T>* g) {
    Tape<T> t(net.params());
    const auto target = framed_target(batch, b);
    const auto z = net.encode(t, batch.encoded_example(b), batch.n_points);
    const auto ce = net.target_loss(t, z, target);
    losses[static_cast<std::size_t>(b)] = static_cast<double>(t.value(ce)(0, 0));
    tokens[static_cast<std::size_t>(b)] = target.size() - 1;
    if (g) t.backward(t.scale(ce, weight), *g);
  };

  threads = std::max(1, std::min(threads, B));
  if (!grads || threads == 1) {
    ParameterSet<T> scratch;
    if (grads) scratch = net.params().zeros_like();
    for (int b = 0; b < B; ++b) {
      if (grads) scratch.set_zero();
      run_one(b, grads ? &scratch : nullptr);
      if (grads) grads->accumulate(scratch);
    }
  } else {
    std::vector<ParameterSet<T>> per_example(static_cast<std::size_t>(B));
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (int b = w; b < B; b += threads) {
          per_example[static_cast<std::size_t>(b)] = net.params().zeros_like();
          run_one(b, &per_example[static_cast<std::size_t>(b)]);
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& g : per_example) grads->accumulate(g);
  }

  LossResult r;
  double total = 0.0;
  for (int b = 0; b < B; ++b) {
    total += losses[static_cast<std::size_t>(b)];
    r.tokens += tokens[static_cast<std::size_t>(b)];
  }
  r.loss = total / B;
  r.per_token = r.tokens ? total / static_cast<double>(r.tokens) : 0.0;
  if (!std::isfinite(r.loss)) throw NonFiniteLoss("non-finite training loss");
  return r;
}

template ParameterSet<float> init_parameters<float>(const ModelConfig&, Rng&);
template ParameterSet<double> init_parameters<double>(const ModelConfig&, Rng&);
template class Network<float>;
template class Network<double>;
template LossResult batch_loss<float>(const Network<float>&, const datagen::TrainingBatch&, ParameterSet<float>*, int);
template LossResult batch_loss<double>(const Network<double>&, const datagen::TrainingBatch&, ParameterSet<double>*,
                                       int);

}  // namespace nsr::model
