#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "nsr/datagen/batch.hpp"
#include "nsr/datagen/generator.hpp"
#include "nsr/datagen/half.hpp"
#include "nsr/datagen/pool_io.hpp"
#include "nsr/error.hpp"

using namespace nsr;
using namespace nsr::datagen;
using namespace nsr::expr;

namespace {

// Independent binary16 reference: every finite non-negative pattern, its value
// computed from the field definitions with std::pow.
struct HalfTable {
  std::vector<std::pair<double, std::uint16_t>> entries;  // ascending value
  HalfTable() {
    for (std::uint32_t bits = 0; bits < 0x7C00; ++bits) {
      const int e = static_cast<int>(bits >> 10);
      const int m = static_cast<int>(bits & 0x3FF);
      const double v = e == 0 ? m * std::pow(2.0, -24) : (1.0 + m / 1024.0) * std::pow(2.0, e - 15);
      entries.emplace_back(v, static_cast<std::uint16_t>(bits));
    }
  }
  std::uint16_t nearest(double v) const {
    const std::uint16_t sign = std::signbit(v) ? 0x8000 : 0;
    const double a = std::fabs(v);
    auto it = std::lower_bound(entries.begin(), entries.end(), a,
                               [](const auto& p, double x) { return p.first < x; });
    if (it == entries.end()) return sign | entries.back().second;  // saturate
    if (it->first == a || it == entries.begin()) return sign | it->second;
    const auto lo = std::prev(it);
    const double dlo = a - lo->first, dhi = it->first - a;
    if (dlo < dhi) return sign | lo->second;
    if (dhi < dlo) return sign | it->second;
    return sign | ((lo->second & 1) == 0 ? lo->second : it->second);
  }
};

const HalfTable& half_table() {
  static const HalfTable t;
  return t;
}

}  // namespace

TEST_CASE("half precision encoding examples") {
  CHECK(to_half_bits(0.0) == 0x0000);
  CHECK(to_half_bits(1.0) == 0x3C00);
  CHECK(to_half_bits(2.0) == 0x4000);
  CHECK(to_half_bits(-2.0) == 0xC000);
  CHECK(to_half_bits(65504.0) == 0x7BFF);
  CHECK(to_half_bits(1e9) == 0x7BFF);
  CHECK(to_half_bits(-1e9) == 0xFBFF);

  const auto zero = encode_multihot(0.0);
  CHECK(std::all_of(zero.begin(), zero.end(), [](auto b) { return b == 0; }));
  const auto one = encode_multihot(1.0);
  for (int k = 0; k < 16; ++k) CHECK(one[k] == (k >= 2 && k <= 5 ? 1 : 0));
  const auto two = encode_multihot(2.0);
  for (int k = 0; k < 16; ++k) CHECK(two[k] == (k == 1 ? 1 : 0));
}

TEST_CASE("half precision ties round to even") {
  CHECK(to_half_bits(1.0 + std::ldexp(1.0, -11)) == 0x3C00);
  CHECK(to_half_bits(1.0 + 3 * std::ldexp(1.0, -11)) == 0x3C02);
  CHECK(to_half_bits(std::ldexp(1.0, -25)) == 0x0000);
  CHECK(to_half_bits(3 * std::ldexp(1.0, -25)) == 0x0002);
  CHECK(to_half_bits(2047.0 + 0.5) == half_table().nearest(2047.5));
  CHECK(to_half_bits(65519.0) == 0x7BFF);
  CHECK(to_half_bits(std::nextafter(std::ldexp(1.0, -14), 0.0)) == 0x0400);
}

TEST_CASE("half precision matches the reference on every pattern and random values") {
  const HalfTable& t = half_table();
  for (const auto& [v, bits] : t.entries) {
    REQUIRE(to_half_bits(v) == bits);
    REQUIRE(half_bits_to_double(bits) == v);
    if (v > 0) REQUIRE(to_half_bits(-v) == (bits | 0x8000));
  }
  // Midpoints between neighbours exercise every tie.
  for (std::size_t i = 0; i + 1 < t.entries.size(); ++i) {
    const double mid = 0.5 * (t.entries[i].first + t.entries[i + 1].first);
    REQUIRE(to_half_bits(mid) == t.nearest(mid));
  }
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double v = uniform(rng, -1000.0, 1000.0);
    const auto enc = encode_multihot(v);
    std::uint16_t pattern = 0;
    for (int k = 0; k < 16; ++k) pattern = static_cast<std::uint16_t>((pattern << 1) | enc[k]);
    REQUIRE(pattern == t.nearest(v));
  }
  for (int i = 0; i < 10000; ++i) {
    const double v = std::ldexp(uniform(rng, 0.5, 1.0), static_cast<int>(uniform_int(rng, -30, 20)));
    REQUIRE(to_half_bits(v) == t.nearest(v));
  }
}

TEST_CASE("generator config validation") {
  GeneratorConfig c;
  CHECK_NOTHROW(c.validate());
  c.operator_weights = {{"+", 0.0}};
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  c.operator_weights = {{"modulo", 1.0}};
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  c = GeneratorConfig{};
  c.leaf_variable_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  c = GeneratorConfig{};
  c.integer_leaf_set = {7};
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
}

TEST_CASE("sample_tree with no internal nodes is a single leaf") {
  GeneratorConfig c;
  c.max_internal_nodes = 0;
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Expression e = sample_tree(c, rng);
    REQUIRE(e.size() == 1);
    CHECK(e == var(1));  // forced variable, relabelled
  }
}

TEST_CASE("sample_tree with only '+' weighted") {
  GeneratorConfig c;
  c.operator_weights = {{"+", 1.0}, {"sin", 0.0}};
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const Expression e = sample_tree(c, rng);
    int internal = 0;
    for (const Node& n : e.nodes()) {
      if (arity(n.symbol) > 0) {
        CHECK(n.symbol == Symbol::Add);
        ++internal;
      }
    }
    CHECK(internal >= 1);
    CHECK(internal <= c.max_internal_nodes);
  }
}

TEST_CASE("sample_tree structure") {
  GeneratorConfig c;
  Rng rng(3);
  for (int i = 0; i < 5000; ++i) {
    const Expression e = sample_tree(c, rng);
    REQUIRE(respects_variable_order(e));
    REQUIRE(e.variable_mask() != 0);
    REQUIRE(e.placeholder_count() == 0);
    REQUIRE(e.real_count() == 0);
    for (std::size_t k = 0; k < e.size(); ++k)
      if (e.nodes()[k].symbol == Symbol::Pow) REQUIRE(is_integer(e.nodes()[e.subtree_end(k + 1)].symbol));
  }
}

TEST_CASE("operator frequencies follow the weights") {
  GeneratorConfig c;
  TreeSampler sampler(c);
  Rng rng(4);
  std::vector<int> draws;
  while (draws.size() < 200000) sampler.sample(rng, &draws);
  std::vector<double> counts(sampler.operators().size(), 0.0);
  for (int d : draws) counts[static_cast<std::size_t>(d)] += 1;

  double total_w = 0;
  for (const auto& op : sampler.operators()) total_w += op.weight;
  double chi2 = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double expected = static_cast<double>(draws.size()) * sampler.operators()[k].weight / total_w;
    chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
  }
  REQUIRE(sampler.operators().size() == 12);
  // Upper 1% point of chi-square with 11 degrees of freedom.
  CHECK(chi2 < 24.725);

  std::map<std::string, double> by_name;
  for (std::size_t k = 0; k < counts.size(); ++k) by_name[sampler.operators()[k].name] = counts[k];
  const double ratio = by_name["+"] / by_name["arcsin"];
  CHECK(ratio >= 9.0);
  CHECK(ratio <= 11.0);
}

TEST_CASE("pool entry from a forced tree") {
  const GeneratorConfig c;
  const auto entry = to_pool_entry(add(var(1), num(0)), c);
  REQUIRE(entry);
  CHECK(entry->expr == var(1));
  CHECK_FALSE(to_pool_entry(add(num(2), num(3)), c));
  // Variables are relabelled after simplification removes some.
  const auto relabelled = to_pool_entry(add(var(3), mul(num(0), var(1))), c);
  REQUIRE(relabelled);
  CHECK(relabelled->expr == var(1));
}

TEST_CASE("build_pool") {
  GeneratorConfig c;
  Rng rng(5);
  const SkeletonPool pool = build_pool(c, 10000, rng);
  REQUIRE(pool.size() == 10000);
  CHECK(pool.stats.total == 10000);
  CHECK(pool.stats.unique < 10000);  // duplicates retained
  std::size_t hist_total = 0;
  for (auto [len, n] : pool.stats.length_histogram) hist_total += n;
  CHECK(hist_total == 10000);
  for (const auto& s : pool.skeletons) {
    REQUIRE(respects_variable_order(s.expr));
    REQUIRE(s.expr.real_count() == 0);
    REQUIRE(simplify(instantiate_ones(s)).size() <= instantiate_ones(s).size());
  }
  const auto freq = frequency_table(pool.skeletons);
  MESSAGE("most frequent: " << freq[0].first << " x" << freq[0].second << ", " << freq[1].first << " x"
                            << freq[1].second);
  // Rank 1 is a short expression; x1 itself is among the most frequent.
  CHECK(parse_infix(freq[0].first).size() <= 2);
  const auto x1_rank = std::find_if(freq.begin(), freq.end(), [](const auto& p) { return p.first == "x1"; }) - freq.begin();
  CHECK(x1_rank < 20);

  CHECK_THROWS_AS(build_pool(c, 0, rng), InvalidConfig);
}

TEST_CASE("build_pool is deterministic") {
  GeneratorConfig c;
  Rng a(99), b(99);
  const auto p1 = build_pool(c, 1000, a);
  const auto p2 = build_pool(c, 1000, b);
  CHECK(p1.skeletons == p2.skeletons);
  std::ostringstream s1, s2;
  write_pool(p1, s1);
  write_pool(p2, s2);
  CHECK(s1.str() == s2.str());
}

TEST_CASE("sample_example hand-evaluated constant placement") {
  const Skeleton placed = place_constants(Skeleton::of(var(1)));
  REQUIRE(placed.placeholder_count == 2);
  const int chosen[] = {0};
  const double values[] = {2.0};
  const auto constants = constants_for(2, chosen, values);
  CHECK(constants == std::vector<double>{2.0, 1.0});
  const Expression e = instantiate(placed, constants);
  CHECK(evaluate(e, {0.5, 0, 0}) == 2.0);

  BatchSpec spec;
  Rng rng(6);
  const Example ex = sample_points(e, 1u, {Interval{0, 1}, Interval{}, Interval{}}, spec, rng);
  for (std::size_t i = 0; i < ex.size(); ++i) {
    CHECK(ex.y[i] == doctest::Approx(2.0 * ex.x.x[0][i] + 1.0));
    CHECK(ex.x.x[1][i] == 0.0);
  }
}

TEST_CASE("sample_example on an undefined support") {
  BatchSpec spec;
  Rng rng(8);
  const std::array<Interval, 3> neg{Interval{-10, -1}, Interval{}, Interval{}};
  CHECK_THROWS_AS(sample_points(call(Symbol::Ln, var(1)), 1u, neg, spec, rng), EmptySupport);
  spec.max_constants = 0;  // every placed constant is 1: ln(x1 + 1) < 0 domain
  CHECK_THROWS_AS(sample_example(Skeleton::of(call(Symbol::Ln, var(1))), spec, rng, neg), EmptySupport);
}

TEST_CASE("sample_example fills all present variables") {
  BatchSpec spec;
  Rng rng(9);
  const Skeleton s = Skeleton::of(add(var(1), add(var(2), var(3))));
  for (int r = 0; r < 20; ++r) {
    const Example ex = sample_example(s, spec, rng);
    std::set<double> col3(ex.x.x[2].begin(), ex.x.x[2].end());
    CHECK(col3.size() > 1);
    CHECK(ex.target.front() == 1);
    CHECK(ex.target.back() == 2);
    for (int j = 0; j < 3; ++j) CHECK(ex.support[j].lo < ex.support[j].hi);
  }
  const Example single = sample_example(Skeleton::of(var(1)), spec, rng);
  CHECK(std::all_of(single.x.x[1].begin(), single.x.x[1].end(), [](double v) { return v == 0.0; }));
  CHECK(std::all_of(single.x.x[2].begin(), single.x.x[2].end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("collate truncates to the smallest example") {
  BatchSpec spec;
  spec.max_points = 100;
  Rng rng(10);
  Example big = sample_points(var(1), 1u, {Interval{0, 1}, Interval{}, Interval{}}, spec, rng);
  spec.max_points = 37;
  Example small = sample_points(var(1), 1u, {Interval{0, 1}, Interval{}, Interval{}}, spec, rng);
  big.target = {1, 3, 2};
  small.target = {1, 8, 3, 3, 2};
  const std::vector<Example> both{big, small};
  const TrainingBatch batch = collate(both, rng);
  CHECK(batch.n_points == 37);
  CHECK(batch.max_len == 5);
  const std::vector<int> t0(batch.target(0).begin(), batch.target(0).end());
  CHECK(t0 == std::vector<int>{1, 3, 2, 0, 0});
  CHECK(batch.target_mask[3] == 0);
  // Kept rows are a subset of the original, in order.
  std::vector<double> kept;
  for (int i = 0; i < 37; ++i) kept.push_back(batch.point(0, 0, i));
  CHECK(std::is_sorted(kept.begin(), kept.end(), [&](double a, double b) {
    return std::find(big.x.x[0].begin(), big.x.x[0].end(), a) < std::find(big.x.x[0].begin(), big.x.x[0].end(), b);
  }));
  for (double v : kept) CHECK(std::find(big.x.x[0].begin(), big.x.x[0].end(), v) != big.x.x[0].end());

  const std::vector<Example> one{big};
  CHECK(collate(one, rng).n_points == 100);
  const std::vector<Example> same{big, big};
  const TrainingBatch b2 = collate(same, rng);
  CHECK(std::count(b2.targets.begin(), b2.targets.end(), 0) == 0);
}

TEST_CASE("assembled batches are clean, encoded and deterministic") {
  GeneratorConfig c;
  Rng prng(11);
  const SkeletonPool pool = build_pool(c, 500, prng);
  BatchSpec spec;
  spec.batch_size = 32;
  spec.max_points = 200;
  Rng r1(12), r2(12);
  for (int round = 0; round < 5; ++round) {
    const TrainingBatch b = assemble_batch(pool, spec, r1);
    const TrainingBatch b2 = assemble_batch(pool, spec, r2);
    REQUIRE(b.points == b2.points);
    REQUIRE(b.targets == b2.targets);
    REQUIRE(b.encoded == b2.encoded);
    REQUIRE(b.batch_size == 32);
    for (double v : b.points) REQUIRE(std::isfinite(v));
    for (int e = 0; e < b.batch_size; ++e) {
      for (int i = 0; i < b.n_points; ++i) REQUIRE(std::fabs(b.point(e, 3, i)) <= spec.y_abs_cap);
      const auto enc = b.encoded_example(e);
      for (int f = 0; f < kFeatures; ++f)
        for (int i = 0; i < b.n_points; ++i) {
          const auto bits = encode_multihot(b.point(e, f, i));
          for (int k = 0; k < kBitsPerValue; ++k)
            REQUIRE(enc[static_cast<std::size_t>(f * kBitsPerValue + k) * b.n_points + i] == bits[k]);
        }
      const auto t = b.target(e);
      REQUIRE(t[0] == 1);
      const auto eos = std::find(t.begin(), t.end(), 2);
      REQUIRE(eos != t.end());
      CHECK_NOTHROW(parse_prefix(std::span<const TokenId>(t.begin() + 1, eos)));
    }
  }
}

TEST_CASE("numeric fingerprints") {
  const ProbeSet probes = make_probe_set(std::uint64_t{42});
  REQUIRE(probes.points.size() == kProbeCount);
  const auto fp = [&](const Expression& e) { return numeric_fingerprint(skeletonize(e), probes); };
  CHECK(fingerprints_equal(fp(add(var(1), var(2))), fp(add(var(2), var(1)))));
  const auto a = fp(var(1));
  const auto b = fp(add(var(1), num(1)));
  CHECK_FALSE(fingerprints_equal(a, b));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] != b[i]);
  CHECK(fingerprints_equal(a, fp(simplify(add(var(1), num(0))))));
  // NaN positions must agree.
  const auto l = fp(call(Symbol::Ln, var(1)));
  CHECK(fingerprints_equal(l, l));
  CHECK_FALSE(fingerprints_equal(l, fp(call(Symbol::Ln, call(Symbol::Sqrt, mul(var(1), var(1)))))));
  // Placeholders evaluate as 1.
  CHECK(fingerprints_equal(numeric_fingerprint(Skeleton::of(mul(ph(), var(1))), probes), a));
}

TEST_CASE("pool file round trip and errors") {
  GeneratorConfig c;
  Rng rng(13);
  const SkeletonPool pool = build_pool(c, 200, rng);
  std::stringstream ss;
  write_pool(pool, ss);
  const SkeletonPool back = read_pool(ss);
  CHECK(back.skeletons == pool.skeletons);
  CHECK(back.stats.unique == pool.stats.unique);

  std::istringstream wrong("# nsr-pool v9 count=0\n");
  CHECK_THROWS_AS(read_pool(wrong), VersionMismatch);
  std::istringstream nohdr("{\"prefix\":[3]}\n");
  CHECK_THROWS_AS(read_pool(nohdr), ParseError);
  std::istringstream bad("# nsr-pool v1 count=1\n{\"prefix\":[8,3]}\n");
  CHECK_THROWS_AS(read_pool(bad), MalformedExpression);
  CHECK_THROWS_AS(read_pool(std::filesystem::path("/nonexistent/pool.txt")), DataFileMissing);
}

TEST_CASE("batch preview csv") {
  BatchSpec spec;
  spec.max_points = 3;
  Rng rng(14);
  Example ex = sample_example(Skeleton::of(var(1)), spec, rng);
  std::ostringstream out;
  write_example_csv(ex, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# target: 1 3 2");
  std::getline(in, line);
  CHECK(line.rfind("# equation:", 0) == 0);
  std::getline(in, line);
  CHECK(line == "x1,x2,x3,y");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(ex.size()));
}
