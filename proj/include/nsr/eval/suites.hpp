#pragma once

#include <filesystem>
#include <optional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nsr/datagen/batch.hpp"
#include "nsr/datagen/generator.hpp"
#include "nsr/eval/metrics.hpp"

namespace nsr::eval {

struct EquationRecord {
  std::string name;
  expr::Expression expr;
  Supports supports;
  bool unreachable = false;  // uses terms the neural regressor cannot emit
  std::optional<expr::Skeleton> skeleton;  // pool skeleton a generated record came from

  /// Throws InvalidConfig: degenerate interval, or a used variable without support.
  void validate() const;
};

struct BenchmarkSuite {
  std::string name;
  std::vector<EquationRecord> records;

  std::size_t size() const { return records.size(); }
};

/// Directory holding aif.jsonl and nguyen.jsonl. NSR_DATA_DIR overrides the
/// build-time default.
std::filesystem::path default_data_dir();

/// Line-delimited records {name, infix | prefix, support: [[lo, hi] | null] x3,
/// unreachable?, skeleton? (prefix ids)}. Throws DataFileMissing, ParseError.
BenchmarkSuite read_suite(const std::filesystem::path& path);
BenchmarkSuite read_suite(std::istream& in, const std::string& name);
void write_suite(const BenchmarkSuite& suite, std::ostream& out);
void write_suite(const BenchmarkSuite& suite, const std::filesystem::path& path);

BenchmarkSuite load_aif(const std::filesystem::path& dir = default_data_dir());
BenchmarkSuite load_nguyen(const std::filesystem::path& dir = default_data_dir());

enum class SooseVariant { WC, NC, FC };
std::string to_string(SooseVariant v);
/// Accepts wc/nc/fc in any case, with or without a "soose-" prefix.
SooseVariant parse_soose_variant(const std::string& s);

/// `count` distinct skeletons from `pool` whose fingerprints match nothing in
/// `train_pool` (nor each other), instantiated per variant with supports
/// drawn as in training. Throws InsufficientDisjointSkeletons.
BenchmarkSuite build_soose(const datagen::SkeletonPool& pool, const datagen::SkeletonPool& train_pool,
                           std::size_t count, SooseVariant variant, Rng& rng,
                           const datagen::BatchSpec& spec = {});

}  // namespace nsr::eval
