#include "nsr/model/config.hpp"

#include "nsr/error.hpp"

namespace nsr::model {

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.hidden_dim = 512;
  c.num_heads = 8;
  c.num_isab = 5;
  c.inducing_points = 50;
  c.pma_seeds = 10;
  c.decoder_layers = 5;
  c.max_target_len = 60;
  return c;
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.hidden_dim = 32;
  c.num_heads = 2;
  c.num_isab = 1;
  c.inducing_points = 8;
  c.pma_seeds = 2;
  c.decoder_layers = 1;
  c.max_target_len = 24;
  return c;
}

void ModelConfig::validate() const {
  if (hidden_dim < 1 || num_heads < 1 || num_isab < 1 || inducing_points < 1 || pma_seeds < 1 ||
      decoder_layers < 1 || max_target_len < 2)
    throw InvalidConfig("model sizes must be >= 1 (max_target_len >= 2)");
  if (hidden_dim % num_heads != 0) throw InvalidConfig("hidden_dim must be divisible by num_heads");
  if (vocab_size != 33) throw InvalidConfig("vocab_size must be 33");
  if (input_feature_dim != 64) throw InvalidConfig("input_feature_dim must be 64");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"hidden_dim", c.hidden_dim},         {"num_heads", c.num_heads},
                     {"num_isab", c.num_isab},             {"inducing_points", c.inducing_points},
                     {"pma_seeds", c.pma_seeds},           {"decoder_layers", c.decoder_layers},
                     {"vocab_size", c.vocab_size},         {"max_target_len", c.max_target_len},
                     {"input_feature_dim", c.input_feature_dim}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.hidden_dim = j.value("hidden_dim", d.hidden_dim);
  c.num_heads = j.value("num_heads", d.num_heads);
  c.num_isab = j.value("num_isab", d.num_isab);
  c.inducing_points = j.value("inducing_points", d.inducing_points);
  c.pma_seeds = j.value("pma_seeds", d.pma_seeds);
  c.decoder_layers = j.value("decoder_layers", d.decoder_layers);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.max_target_len = j.value("max_target_len", d.max_target_len);
  c.input_feature_dim = j.value("input_feature_dim", d.input_feature_dim);
}

namespace {

void attention_shapes(std::vector<ParameterShape>& out, const std::string& p, int H) {
  for (const char* w : {"wq", "wk", "wv", "wo"}) {
    out.push_back({p + "." + w, H, H});
    out.push_back({p + ".b" + std::string(w + 1), 1, H});
  }
}

void ff_shapes(std::vector<ParameterShape>& out, const std::string& p, int H, int F) {
  out.push_back({p + ".w1", H, F});
  out.push_back({p + ".b1", 1, F});
  out.push_back({p + ".w2", F, H});
  out.push_back({p + ".b2", 1, H});
}

void ln_shapes(std::vector<ParameterShape>& out, const std::string& p, int H) {
  out.push_back({p + ".gain", 1, H});
  out.push_back({p + ".bias", 1, H});
}

void mab_shapes(std::vector<ParameterShape>& out, const std::string& p, int H, int F) {
  attention_shapes(out, p + ".attn", H);
  ln_shapes(out, p + ".ln0", H);
  ff_shapes(out, p + ".ff", H, F);
  ln_shapes(out, p + ".ln1", H);
}

}  // namespace

std::vector<ParameterShape> parameter_layout(const ModelConfig& c) {
  c.validate();
  const int H = c.hidden_dim, F = c.ff_dim();
  std::vector<ParameterShape> out;
  out.push_back({"enc.input.w", c.input_feature_dim, H});
  out.push_back({"enc.input.b", 1, H});
  for (int i = 0; i < c.num_isab; ++i) {
    const std::string p = "enc.isab" + std::to_string(i);
    out.push_back({p + ".inducing", c.inducing_points, H});
    mab_shapes(out, p + ".mab0", H, F);
    mab_shapes(out, p + ".mab1", H, F);
  }
  out.push_back({"enc.pma.seeds", c.pma_seeds, H});
  mab_shapes(out, "enc.pma.mab", H, F);

  out.push_back({"dec.tok_emb", c.vocab_size, H});
  out.push_back({"dec.pos_emb", c.max_target_len, H});
  for (int i = 0; i < c.decoder_layers; ++i) {
    const std::string p = "dec.layer" + std::to_string(i);
    attention_shapes(out, p + ".self", H);
    ln_shapes(out, p + ".ln0", H);
    attention_shapes(out, p + ".cross", H);
    ln_shapes(out, p + ".ln1", H);
    ff_shapes(out, p + ".ff", H, F);
    ln_shapes(out, p + ".ln2", H);
  }
  out.push_back({"dec.out.w", H, c.vocab_size});
  out.push_back({"dec.out.b", 1, c.vocab_size});
  return out;
}

std::size_t parameter_count(const ModelConfig& c) {
  std::size_t n = 0;
  for (const auto& s : parameter_layout(c)) n += static_cast<std::size_t>(s.rows) * static_cast<std::size_t>(s.cols);
  return n;
}

}  // namespace nsr::model
