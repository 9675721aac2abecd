#include "nsr/inference/beam.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "nsr/error.hpp"

namespace nsr::inference {

using expr::Symbol;
using expr::TokenId;

void InferenceConfig::validate() const {
  if (beam_size < 1) throw InvalidConfig("beam_size must be >= 1");
  if (bfgs_restarts < 1) throw InvalidConfig("bfgs_restarts must be >= 1");
  if (!(token_penalty >= 0.0)) throw InvalidConfig("token_penalty must be >= 0");
  if (max_decode_len < 0) throw InvalidConfig("max_decode_len must be >= 0");
  if (!(restart_init_range.lo <= restart_init_range.hi)) throw InvalidConfig("restart_init_range is empty");
  if (threads < 1) throw InvalidConfig("threads must be >= 1");
  bfgs.validate();
}

namespace {

struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_likelihood = 0.0;
};

// Higher likelihood first, then shorter, then lexicographic tokens.
bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_likelihood != b.log_likelihood) return a.log_likelihood > b.log_likelihood;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

std::vector<double> next_log_probs(const model::Network<float>& net, const model::Mat<float>& z,
                                   const std::vector<TokenId>& prefix) {
  const model::Mat<float> logits = net.decode_logits(z, prefix);
  const auto row = logits.row(logits.rows() - 1);
  const double mx = static_cast<double>(row.maxCoeff());
  double sum = 0.0;
  for (Eigen::Index k = 0; k < row.size(); ++k) sum += std::exp(static_cast<double>(row(k)) - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(static_cast<std::size_t>(row.size()));
  for (Eigen::Index k = 0; k < row.size(); ++k) out[static_cast<std::size_t>(k)] = static_cast<double>(row(k)) - lse;
  return out;
}

// Pad and sos are never emitted.
bool emittable(TokenId t) { return t > expr::token_id(Symbol::Sos); }

int resolve_max_len(const model::Network<float>& net, int requested) {
  const int cap = net.config().max_target_len;
  return requested <= 0 ? cap : std::min(requested, cap);
}

}  // namespace

BeamResult beam_search(const model::Network<float>& net, const model::Mat<float>& z, const InferenceConfig& config) {
  config.validate();
  const int max_len = resolve_max_len(net, config.max_decode_len);
  const auto width = static_cast<std::size_t>(config.beam_size);
  const TokenId eos = expr::token_id(Symbol::Eos);

  std::vector<Hypothesis> live{{{expr::token_id(Symbol::Sos)}, 0.0}};
  std::vector<Hypothesis> finished;
  BeamResult result;

  // A framed sequence has at most max_len + 1 tokens, so the decoder never sees
  // more than max_len.
  while (!live.empty()) {
    std::vector<std::vector<double>> scores(live.size());
    const int workers = std::min<int>(config.threads, static_cast<int>(live.size()));
    if (workers <= 1) {
      for (std::size_t i = 0; i < live.size(); ++i) scores[i] = next_log_probs(net, z, live[i].tokens);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          for (std::size_t i = static_cast<std::size_t>(w); i < live.size(); i += static_cast<std::size_t>(workers))
            scores[i] = next_log_probs(net, z, live[i].tokens);
        });
      for (auto& th : pool) th.join();
    }
    std::vector<Hypothesis> expansions;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const Hypothesis& h = live[i];
      const auto& lp = scores[i];
      for (std::size_t t = 0; t < lp.size(); ++t) {
        if (!emittable(static_cast<TokenId>(t))) continue;
        Hypothesis e{h.tokens, h.log_likelihood + lp[t]};
        e.tokens.push_back(static_cast<TokenId>(t));
        expansions.push_back(std::move(e));
      }
    }
    const std::size_t keep = std::min(width, expansions.size());
    std::partial_sort(expansions.begin(), expansions.begin() + static_cast<std::ptrdiff_t>(keep), expansions.end(), better);
    expansions.resize(keep);
    live.clear();
    for (Hypothesis& e : expansions) {
      if (e.tokens.back() == eos) {
        finished.push_back(std::move(e));
      } else if (static_cast<int>(e.tokens.size()) > max_len) {
        result.invalid.push_back(std::move(e.tokens));  // out of room before eos
      } else {
        live.push_back(std::move(e));
      }
    }
  }

  std::sort(finished.begin(), finished.end(), better);
  if (finished.size() > width) finished.resize(width);
  for (Hypothesis& h : finished) {
    try {
      const std::span<const TokenId> body(h.tokens.data() + 1, h.tokens.size() - 2);
      Candidate c;
      c.skeleton = expr::Skeleton::of(expr::parse_prefix(body));
      c.tokens = std::move(h.tokens);
      c.log_likelihood = h.log_likelihood;
      result.candidates.push_back(std::move(c));
    } catch (const Error&) {
      result.invalid.push_back(std::move(h.tokens));
    }
  }
  if (result.candidates.empty())
    throw NoValidCandidate("beam search produced no parseable sequence (" + std::to_string(result.invalid.size()) +
                           " invalid)");
  return result;
}

std::vector<TokenId> greedy_decode(const model::Network<float>& net, const model::Mat<float>& z, int max_len) {
  max_len = resolve_max_len(net, max_len);
  std::vector<TokenId> tokens{expr::token_id(Symbol::Sos)};
  while (static_cast<int>(tokens.size()) <= max_len) {
    const auto lp = next_log_probs(net, z, tokens);
    TokenId best = -1;
    for (std::size_t t = 0; t < lp.size(); ++t)
      if (emittable(static_cast<TokenId>(t)) && (best < 0 || lp[t] > lp[static_cast<std::size_t>(best)]))
        best = static_cast<TokenId>(t);
    tokens.push_back(best);
    if (best == expr::token_id(Symbol::Eos) || static_cast<int>(tokens.size()) > max_len) break;
  }
  return tokens;
}

}  // namespace nsr::inference
