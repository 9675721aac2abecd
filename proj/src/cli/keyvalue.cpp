#include "nsr/cli/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "nsr/error.hpp"

namespace nsr::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text, const std::string& where) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw InvalidConfig(where + ": '" + key + "' expects a number, got '" + text + "'");
  return v;
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + " line " + std::to_string(line_no);
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(where + ": empty key");
    kv.entries_[key] = Entry{trim(line.substr(eq + 1)), where, false};
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataFileMissing("cannot open config file " + path.string());
  return parse(in, path.string());
}

void KeyValues::set(const std::string& assignment) {
  std::istringstream in(assignment);
  KeyValues one = parse(in, "--set " + assignment);
  if (one.entries_.empty()) throw ParseError("--set expects key=value");
  for (auto& [k, e] : one.entries_) entries_[k] = e;
}

const KeyValues::Entry* KeyValues::find(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.used = true;
  return &it->second;
}

std::optional<std::string> KeyValues::take(const std::string& key) {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  return e->value;
}

void KeyValues::take(const std::string& key, int& out) {
  if (const Entry* e = find(key)) out = parse_number<int>(key, e->value, e->where);
}

void KeyValues::take(const std::string& key, double& out) {
  if (const Entry* e = find(key)) out = parse_number<double>(key, e->value, e->where);
}

void KeyValues::take(const std::string& key, std::uint64_t& out) {
  if (const Entry* e = find(key)) out = parse_number<std::uint64_t>(key, e->value, e->where);
}

void KeyValues::take(const std::string& key, bool& out) {
  const Entry* e = find(key);
  if (!e) return;
  if (e->value == "true" || e->value == "1" || e->value == "yes") {
    out = true;
  } else if (e->value == "false" || e->value == "0" || e->value == "no") {
    out = false;
  } else {
    throw InvalidConfig(e->where + ": '" + key + "' expects true or false");
  }
}

void KeyValues::take(const std::string& key, std::string& out) {
  if (const Entry* e = find(key)) out = e->value;
}

void KeyValues::take(const std::string& key, std::vector<int>& out) {
  const Entry* e = find(key);
  if (!e) return;
  out.clear();
  std::stringstream ss(e->value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item), e->where));
}

std::vector<std::string> KeyValues::unconsumed_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_)
    if (!e.used && k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

void KeyValues::require_consumed() const {
  std::string unknown;
  for (const auto& [k, e] : entries_)
    if (!e.used) unknown += (unknown.empty() ? "" : ", ") + k + " (" + e.where + ")";
  if (!unknown.empty()) throw InvalidConfig("unknown config keys: " + unknown);
}

void apply(KeyValues& kv, datagen::GeneratorConfig& c) {
  kv.take("max_internal_nodes", c.max_internal_nodes);
  kv.take("leaf_variable_prob", c.leaf_variable_prob);
  kv.take("integer_leaves", c.integer_leaf_set);
  kv.take("max_skeleton_length", c.max_skeleton_length);
  for (const std::string& key : kv.unconsumed_with_prefix("weight.")) {
    double w = 0.0;
    kv.take(key, w);
    c.operator_weights[key.substr(7)] = w;
  }
  c.validate();
}

void apply(KeyValues& kv, datagen::BatchSpec& c) {
  kv.take("batch_size", c.batch_size);
  kv.take("max_constants", c.max_constants);
  kv.take("constant_lo", c.constant_range.lo);
  kv.take("constant_hi", c.constant_range.hi);
  kv.take("support_lo", c.support_extrema_range.lo);
  kv.take("support_hi", c.support_extrema_range.hi);
  kv.take("max_points", c.max_points);
  kv.take("y_abs_cap", c.y_abs_cap);
  c.validate();
}

void apply(KeyValues& kv, model::AdamConfig& c) {
  kv.take("learning_rate", c.learning_rate);
  kv.take("beta1", c.beta1);
  kv.take("beta2", c.beta2);
  kv.take("epsilon", c.epsilon);
  kv.take("clip_norm", c.clip_norm);
  c.validate();
}

void apply(KeyValues& kv, model::TrainConfig& c) {
  kv.take("log_every", c.log_every);
  kv.take("validate_every", c.validate_every);
  kv.take("keep_best", c.keep_best);
  kv.take("patience", c.patience);
  kv.take("max_seconds", c.max_seconds);
  if (c.log_every < 1) throw InvalidConfig("log_every must be >= 1");
}

model::ModelConfig model_preset(const std::string& name) {
  if (name == "desk" || name == "default") return model::ModelConfig{};
  if (name == "toy") return model::ModelConfig::toy();
  if (name == "paper") return model::ModelConfig::paper();
  throw InvalidConfig("unknown model preset '" + name + "' (desk, toy, paper)");
}

void apply(KeyValues& kv, model::ModelConfig& c) {
  if (auto preset = kv.take("preset")) c = model_preset(*preset);
  kv.take("hidden_dim", c.hidden_dim);
  kv.take("num_heads", c.num_heads);
  kv.take("num_isab", c.num_isab);
  kv.take("inducing_points", c.inducing_points);
  kv.take("pma_seeds", c.pma_seeds);
  kv.take("decoder_layers", c.decoder_layers);
  kv.take("max_target_len", c.max_target_len);
  c.validate();
}

void apply(KeyValues& kv, inference::InferenceConfig& c) {
  kv.take("beam_size", c.beam_size);
  kv.take("bfgs_restarts", c.bfgs_restarts);
  kv.take("token_penalty", c.token_penalty);
  kv.take("max_decode_len", c.max_decode_len);
  kv.take("restart_lo", c.restart_init_range.lo);
  kv.take("restart_hi", c.restart_init_range.hi);
  kv.take("bfgs_max_iterations", c.bfgs.max_iterations);
  kv.take("bfgs_gradient_tolerance", c.bfgs.gradient_tolerance);
  c.validate();
}

void apply(KeyValues& kv, gp::GpConfig& c) {
  kv.take("population_size", c.population_size);
  kv.take("tournament_size", c.tournament_size);
  kv.take("mutation_prob", c.mutation_prob);
  kv.take("crossover_prob", c.crossover_prob);
  kv.take("point_replace_prob", c.point_replace_prob);
  kv.take("gp_constant_lo", c.constant_range.lo);
  kv.take("gp_constant_hi", c.constant_range.hi);
  kv.take("generations", c.generations);
  kv.take("max_depth", c.max_depth);
  kv.take("parsimony_coefficient", c.parsimony_coefficient);
  if (auto fs = kv.take("function_set")) {
    c.function_set.clear();
    std::stringstream ss(*fs);
    std::string item;
    while (std::getline(ss, item, ',')) c.function_set.push_back(gp::parse_op(trim(item)));
  }
  if (auto metric = kv.take("fitness")) {
    if (*metric == "mae") {
      c.metric = gp::FitnessMetric::MAE;
    } else if (*metric == "mse") {
      c.metric = gp::FitnessMetric::MSE;
    } else {
      throw InvalidConfig("fitness must be mae or mse");
    }
  }
  c.validate();
}

void apply(KeyValues& kv, eval::MetricConfig& c) {
  kv.take("atol", c.atol);
  kv.take("rtol", c.rtol);
  kv.take("point_pass_fraction", c.point_pass_fraction);
  kv.take("r2_threshold", c.r2_threshold);
  kv.take("eval_points", c.eval_points);
  c.validate();
}

using nlohmann::json;

json snapshot(const datagen::GeneratorConfig& c) {
  return {{"max_internal_nodes", c.max_internal_nodes},
          {"operator_weights", c.operator_weights},
          {"leaf_variable_prob", c.leaf_variable_prob},
          {"integer_leaves", c.integer_leaf_set},
          {"max_skeleton_length", c.max_skeleton_length}};
}

json snapshot(const datagen::BatchSpec& c) {
  return {{"batch_size", c.batch_size},
          {"max_constants", c.max_constants},
          {"constant_range", {c.constant_range.lo, c.constant_range.hi}},
          {"support_extrema_range", {c.support_extrema_range.lo, c.support_extrema_range.hi}},
          {"max_points", c.max_points},
          {"y_abs_cap", c.y_abs_cap}};
}

json snapshot(const model::AdamConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1}, {"beta2", c.beta2},
          {"epsilon", c.epsilon},             {"clip_norm", c.clip_norm}};
}

json snapshot(const model::TrainConfig& c) {
  return {{"steps", c.steps},         {"log_every", c.log_every}, {"validate_every", c.validate_every},
          {"keep_best", c.keep_best}, {"patience", c.patience},   {"max_seconds", c.max_seconds},
          {"threads", c.threads},     {"seed", c.seed}};
}

json snapshot(const inference::InferenceConfig& c) {
  return {{"beam_size", c.beam_size},
          {"bfgs_restarts", c.bfgs_restarts},
          {"token_penalty", c.token_penalty},
          {"max_decode_len", c.max_decode_len},
          {"restart_init_range", {c.restart_init_range.lo, c.restart_init_range.hi}},
          {"bfgs_max_iterations", c.bfgs.max_iterations},
          {"bfgs_gradient_tolerance", c.bfgs.gradient_tolerance},
          {"seed", c.seed}};
}

json snapshot(const gp::GpConfig& c) {
  std::vector<std::string> fs;
  for (gp::GpOp op : c.function_set) fs.push_back(gp::op_name(op));
  return {{"population_size", c.population_size},
          {"tournament_size", c.tournament_size},
          {"mutation_prob", c.mutation_prob},
          {"crossover_prob", c.crossover_prob},
          {"point_replace_prob", c.point_replace_prob},
          {"constant_range", {c.constant_range.lo, c.constant_range.hi}},
          {"generations", c.generations},
          {"function_set", fs},
          {"max_depth", c.max_depth},
          {"parsimony_coefficient", c.parsimony_coefficient},
          {"fitness", c.metric == gp::FitnessMetric::MAE ? "mae" : "mse"},
          {"seed", c.seed}};
}

json snapshot(const eval::MetricConfig& c) {
  return {{"atol", c.atol},
          {"rtol", c.rtol},
          {"point_pass_fraction", c.point_pass_fraction},
          {"r2_threshold", c.r2_threshold},
          {"eval_points", c.eval_points}};
}

}  // namespace nsr::cli
