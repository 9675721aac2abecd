#pragma once

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsr/datagen/batch.hpp"
#include "nsr/datagen/generator.hpp"
#include "nsr/eval/metrics.hpp"
#include "nsr/gp/evolve.hpp"
#include "nsr/inference/beam.hpp"
#include "nsr/model/config.hpp"
#include "nsr/model/train.hpp"

namespace nsr::cli {

/// "key = value" lines; '#' starts a comment. Every key must be consumed by
/// some config before require_consumed(), so typos are reported.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& source);
  /// Throws DataFileMissing, ParseError.
  static KeyValues load(const std::filesystem::path& path);

  /// "key=value" override (later wins).
  void set(const std::string& assignment);
  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::optional<std::string> take(const std::string& key);
  void take(const std::string& key, int& out);
  void take(const std::string& key, double& out);
  void take(const std::string& key, bool& out);
  void take(const std::string& key, std::uint64_t& out);
  void take(const std::string& key, std::string& out);
  void take(const std::string& key, std::vector<int>& out);
  std::vector<std::string> unconsumed_with_prefix(const std::string& prefix) const;

  /// Throws InvalidConfig naming every key nothing asked for.
  void require_consumed() const;

 private:
  struct Entry {
    std::string value;
    std::string where;
    bool used = false;
  };
  const Entry* find(const std::string& key);
  std::map<std::string, Entry> entries_;
};

void apply(KeyValues& kv, datagen::GeneratorConfig& c);
void apply(KeyValues& kv, datagen::BatchSpec& c);
void apply(KeyValues& kv, model::AdamConfig& c);
void apply(KeyValues& kv, model::TrainConfig& c);
/// `preset` (desk, toy, paper) is applied first, then individual fields.
void apply(KeyValues& kv, model::ModelConfig& c);
void apply(KeyValues& kv, inference::InferenceConfig& c);
void apply(KeyValues& kv, gp::GpConfig& c);
void apply(KeyValues& kv, eval::MetricConfig& c);

/// Named preset, or throws InvalidConfig.
model::ModelConfig model_preset(const std::string& name);

nlohmann::json snapshot(const datagen::GeneratorConfig& c);
nlohmann::json snapshot(const datagen::BatchSpec& c);
nlohmann::json snapshot(const model::AdamConfig& c);
nlohmann::json snapshot(const model::TrainConfig& c);
nlohmann::json snapshot(const inference::InferenceConfig& c);
nlohmann::json snapshot(const gp::GpConfig& c);
nlohmann::json snapshot(const eval::MetricConfig& c);

}  // namespace nsr::cli
