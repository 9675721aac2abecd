#include "nsr/eval/suites.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "nsr/error.hpp"

#ifndef NSR_DEFAULT_DATA_DIR
#define NSR_DEFAULT_DATA_DIR "data"
#endif

namespace nsr::eval {

using nlohmann::json;

void EquationRecord::validate() const {
  const unsigned mask = expr.variable_mask();
  for (int j = 0; j < expr::kMaxVariables; ++j) {
    const auto& iv = supports[static_cast<std::size_t>(j)];
    const bool used = (mask >> j) & 1u;
    if (used && !iv) throw InvalidConfig(name + ": x" + std::to_string(j + 1) + " is used but has no support");
    if (!used && iv) throw InvalidConfig(name + ": x" + std::to_string(j + 1) + " has a support but is unused");
    if (iv && !(iv->lo < iv->hi)) throw InvalidConfig(name + ": support of x" + std::to_string(j + 1) + " is empty");
  }
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("NSR_DATA_DIR"); env && *env) return env;
  return NSR_DEFAULT_DATA_DIR;
}

namespace {

EquationRecord parse_record(const std::string& line, std::size_t line_no) {
  const auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("suite line " + std::to_string(line_no) + ": " + what);
  };
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
  EquationRecord r;
  try {
    r.name = j.value("name", "eq-" + std::to_string(line_no));
    if (j.contains("infix")) {
      r.expr = expr::parse_infix(j.at("infix").get<std::string>());
    } else if (j.contains("prefix")) {
      r.expr = expr::parse_prefix(j.at("prefix").get<std::vector<expr::TokenId>>());
    } else {
      throw fail("record needs infix or prefix");
    }
    const json& sup = j.at("support");
    if (!sup.is_array() || sup.size() > static_cast<std::size_t>(expr::kMaxVariables))
      throw fail("support must be an array of at most 3 entries");
    for (std::size_t k = 0; k < sup.size(); ++k) {
      if (sup[k].is_null()) continue;
      if (!sup[k].is_array() || sup[k].size() != 2) throw fail("support entries are [lo, hi] or null");
      r.supports[k] = Interval{sup[k][0].get<double>(), sup[k][1].get<double>()};
    }
    r.unreachable = j.value("unreachable", false);
    if (j.contains("skeleton"))
      r.skeleton = expr::Skeleton::of(expr::parse_prefix(j.at("skeleton").get<std::vector<expr::TokenId>>()));
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
  r.validate();
  return r;
}

}  // namespace

BenchmarkSuite read_suite(std::istream& in, const std::string& name) {
  BenchmarkSuite suite;
  suite.name = name;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    suite.records.push_back(parse_record(line, line_no));
  }
  return suite;
}

BenchmarkSuite read_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataFileMissing("cannot open suite file " + path.string());
  return read_suite(in, path.stem().string());
}

void write_suite(const BenchmarkSuite& suite, std::ostream& out) {
  for (const EquationRecord& r : suite.records) {
    json j;
    j["name"] = r.name;
    j["infix"] = expr::to_infix(r.expr);
    json sup = json::array();
    for (const auto& iv : r.supports) sup.push_back(iv ? json::array({iv->lo, iv->hi}) : json(nullptr));
    j["support"] = sup;
    if (r.unreachable) j["unreachable"] = true;
    if (r.skeleton) j["skeleton"] = expr::to_prefix(r.skeleton->expr);
    out << j.dump() << '\n';
  }
}

void write_suite(const BenchmarkSuite& suite, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidConfig("cannot write suite file " + path.string());
  write_suite(suite, out);
}

BenchmarkSuite load_aif(const std::filesystem::path& dir) {
  BenchmarkSuite s = read_suite(dir / "aif.jsonl");
  s.name = "aif";
  return s;
}

BenchmarkSuite load_nguyen(const std::filesystem::path& dir) {
  BenchmarkSuite s = read_suite(dir / "nguyen.jsonl");
  s.name = "nguyen";
  return s;
}

std::string to_string(SooseVariant v) {
  switch (v) {
    case SooseVariant::WC: return "soose-wc";
    case SooseVariant::NC: return "soose-nc";
    case SooseVariant::FC: return "soose-fc";
  }
  return "?";
}

SooseVariant parse_soose_variant(const std::string& s) {
  std::string t;
  for (char c : s) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t.rfind("soose-", 0) == 0) t = t.substr(6);
  if (t == "wc") return SooseVariant::WC;
  if (t == "nc") return SooseVariant::NC;
  if (t == "fc") return SooseVariant::FC;
  throw InvalidConfig("unknown SOOSE variant '" + s + "' (expected wc, nc or fc)");
}

namespace {

constexpr std::size_t kSignature = 8;
constexpr int kSupportAttempts = 20;

std::vector<double> head(const std::vector<double>& v) {
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(kSignature, v.size()))};
}

std::optional<EquationRecord> instantiate_record(const expr::Skeleton& skel, SooseVariant variant,
                                                 const datagen::BatchSpec& spec, Rng& rng) {
  const unsigned mask = skel.expr.variable_mask();
  for (int attempt = 0; attempt < kSupportAttempts; ++attempt) {
    try {
      EquationRecord r;
      std::array<Interval, expr::kMaxVariables> support{};
      if (variant == SooseVariant::WC) {
        const datagen::Example ex = datagen::sample_example(skel, spec, rng);
        r.expr = ex.equation;
        support = ex.support;
      } else {
        if (variant == SooseVariant::NC) {
          r.expr = expr::instantiate_ones(skel);
        } else {
          const expr::Skeleton placed = expr::place_constants(skel);
          std::vector<double> c(static_cast<std::size_t>(placed.placeholder_count));
          for (double& v : c) v = uniform(rng, spec.constant_range.lo, spec.constant_range.hi);
          r.expr = expr::instantiate(placed, c);
        }
        support = datagen::draw_support(mask, spec, rng);
        datagen::sample_points(r.expr, mask, support, spec, rng);  // EmptySupport check
      }
      r.skeleton = skel;
      for (int j = 0; j < expr::kMaxVariables; ++j)
        if ((mask >> j) & 1u) r.supports[static_cast<std::size_t>(j)] = support[static_cast<std::size_t>(j)];
      return r;
    } catch (const EmptySupport&) {
    }
  }
  return std::nullopt;
}

}  // namespace

BenchmarkSuite build_soose(const datagen::SkeletonPool& pool, const datagen::SkeletonPool& train_pool,
                           std::size_t count, SooseVariant variant, Rng& rng, const datagen::BatchSpec& spec) {
  if (pool.skeletons.empty()) throw InvalidConfig("SOOSE source pool is empty");
  spec.validate();
  const datagen::ProbeSet probes = datagen::make_probe_set(rng);

  // Only a short signature of each training fingerprint is kept; full
  // fingerprints are recomputed for signature hits.
  std::vector<std::vector<double>> train_sig;
  train_sig.reserve(train_pool.size());
  for (const auto& s : train_pool.skeletons) train_sig.push_back(head(datagen::numeric_fingerprint(s, probes)));
  const auto seen_in_training = [&](const std::vector<double>& fp) {
    const std::vector<double> sig = head(fp);
    for (std::size_t i = 0; i < train_sig.size(); ++i)
      if (datagen::fingerprints_equal(sig, train_sig[i]) &&
          datagen::fingerprints_equal(fp, datagen::numeric_fingerprint(train_pool.skeletons[i], probes)))
        return true;
    return false;
  };

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1))]);

  BenchmarkSuite suite;
  suite.name = to_string(variant);
  std::vector<std::vector<double>> accepted;
  for (std::size_t idx : order) {
    if (suite.size() == count) break;
    const expr::Skeleton& skel = pool.skeletons[idx];
    const auto fp = datagen::numeric_fingerprint(skel, probes);
    if (seen_in_training(fp)) continue;
    if (std::any_of(accepted.begin(), accepted.end(),
                    [&](const auto& other) { return datagen::fingerprints_equal(fp, other); }))
      continue;
    auto rec = instantiate_record(skel, variant, spec, rng);
    if (!rec) continue;
    char name[32];
    std::snprintf(name, sizeof name, "%s-%03zu", to_string(variant).c_str(), suite.size() + 1);
    rec->name = name;
    accepted.push_back(fp);
    suite.records.push_back(std::move(*rec));
  }
  if (suite.size() < count)
    throw InsufficientDisjointSkeletons("only " + std::to_string(suite.size()) + " of " + std::to_string(count) +
                                        " requested skeletons are disjoint from the training pool");
  return suite;
}

}  // namespace nsr::eval
