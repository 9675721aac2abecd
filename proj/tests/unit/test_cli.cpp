#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "nsr/cli/commands.hpp"
#include "nsr/cli/manifest.hpp"
#include "nsr/datagen/batch.hpp"
#include "nsr/datagen/pool_io.hpp"
#include "nsr/error.hpp"
#include "nsr/eval/suites.hpp"
#include "nsr/inference/beam.hpp"
#include "nsr/model/checkpoint.hpp"
#include "nsr/model/train.hpp"

using namespace nsr;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome nsr_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nsr_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string l;
  while (std::getline(ss, l)) out.push_back(l);
  return out;
}

void write_csv(const fs::path& p, const std::string& infix, int n) {
  const auto e = expr::parse_infix(infix);
  std::ofstream f(p);
  f << "# generated\nx1,x2,y\n";
  for (int i = 0; i < n; ++i) {
    const double a = -1.5 + 3.0 * i / n, b = 0.7 - 2.0 * ((i * 7) % n) / n;
    expr::Columns c;
    c.x[0] = {a};
    c.x[1] = {b};
    c.x[2] = {0.0};
    f << a << ',' << b << ',' << expr::Evaluator(e).run(c)[0] << '\n';
  }
}

// A tiny model trained through the CLI on a pool holding only x1 + x2.
const fs::path& trained_dir() {
  static const fs::path dir = [] {
    const fs::path root = scratch("trained");
    datagen::SkeletonPool pool;
    pool.skeletons.push_back(expr::Skeleton::of(expr::parse_infix("x1 + x2")));
    datagen::write_pool(pool, root / "pool.jsonl");
    std::ofstream(root / "tiny.cfg") << "preset = toy\nhidden_dim = 16\nnum_heads = 2\ninducing_points = 4\n"
                                        "pma_seeds = 2\nmax_target_len = 12\n";
    std::ofstream(root / "train.cfg") << "# optimizer\nlearning_rate = 1e-2\nbatch_size = 4\nmax_points = 20\n"
                                         "log_every = 50\n";
    const auto r = nsr_run({"train", "--pool", (root / "pool.jsonl").string(), "--model-config",
                            (root / "tiny.cfg").string(), "--config", (root / "train.cfg").string(), "--steps",
                            "150", "--seed", "41", "--threads", "1", "--out", (root / "model").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return root / "model";
  }();
  return dir;
}

}  // namespace

TEST_CASE("gen-pool writes the requested count, deterministically per seed") {
  const fs::path d = scratch("genpool");
  const auto a = nsr_run({"gen-pool", "--count", "300", "--seed", "7", "--out", (d / "a").string()});
  const auto b = nsr_run({"gen-pool", "--count", "300", "--seed", "7", "--out", (d / "b").string()});
  const auto c = nsr_run({"gen-pool", "--count", "300", "--seed", "8", "--out", (d / "c").string()});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  REQUIRE(c.code == 0);
  CHECK(slurp(d / "a/pool.jsonl") == slurp(d / "b/pool.jsonl"));
  CHECK(slurp(d / "a/pool.jsonl") != slurp(d / "c/pool.jsonl"));

  const auto pool = datagen::read_pool(d / "a/pool.jsonl");
  CHECK(pool.size() == 300);
  double total = 0;
  for (const auto& s : pool.skeletons) total += static_cast<double>(expr::expr_length(s));
  const double mean = total / 300.0;
  CHECK(mean >= 2.0);
  CHECK(mean <= 15.0);
  CHECK(a.out.find("skeletons: 300") != std::string::npos);
  CHECK(a.out.find("unique: ") != std::string::npos);

  const cli::RunManifest m = cli::read_manifest(d / "a/manifest.json");
  CHECK(m.command == "gen-pool");
  CHECK(m.seed == 7);
  CHECK(m.tool_version == cli::kToolVersion);
  CHECK(m.artifacts == std::vector<std::string>{"pool.jsonl"});
  CHECK(m.config.at("count") == 300);
  CHECK(m.config.at("generator").contains("operator_weights"));
}

TEST_CASE("usage and config errors exit with 2") {
  const fs::path d = scratch("usage");
  CHECK(nsr_run({}).code == 2);
  CHECK(nsr_run({"no-such-command"}).code == 2);
  CHECK(nsr_run({"gen-pool", "--out", d.string()}).code == 2);
  const auto r = nsr_run({"gen-pool", "--count", "5", "--out", d.string(), "--set", "no_such_key=1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("no_such_key") != std::string::npos);
  CHECK(nsr_run({"gen-pool", "--count", "5", "--out", d.string(), "--set", "leaf_variable_prob=2"}).code == 2);
  CHECK(nsr_run({"gen-pool", "--count", "5", "--out", d.string(), "--config", (d / "missing.cfg").string()}).code ==
        2);
  CHECK(nsr_run({"--help"}).code == 0);
  CHECK(nsr_run({"--version"}).out == std::string(cli::kToolVersion) + "\n");
}

TEST_CASE("train with zero steps saves the initialization; resume continues the step count") {
  const fs::path d = scratch("train");
  REQUIRE(nsr_run({"gen-pool", "--count", "50", "--seed", "1", "--out", (d / "pool").string(), "--set",
                   "max_internal_nodes=3"})
              .code == 0);
  const auto z = nsr_run({"train", "--pool", (d / "pool").string(), "--model-config", "toy", "--steps", "0",
                          "--seed", "2", "--out", (d / "zero").string()});
  REQUIRE_MESSAGE(z.code == 0, z.err);
  const auto ck = model::load_checkpoint(d / "zero/checkpoint.bin");
  Rng init_rng = split_stream(2, 0);
  const auto expected = model::init_parameters<float>(model::ModelConfig::toy(), init_rng);
  CHECK(ck.params.scalar_count() == expected.scalar_count());
  REQUIRE(ck.params.size() == expected.size());
  bool identical = true;
  for (std::size_t i = 0; i < expected.size(); ++i) identical &= ck.params.values[i] == expected.values[i];
  CHECK(identical);
  CHECK(lines(slurp(d / "zero/trace.csv")).size() == 1);

  const auto first = nsr_run({"train", "--pool", (d / "pool").string(), "--model-config", "toy", "--steps", "6",
                              "--seed", "2", "--set", "log_every=3", "--out", (d / "first").string()});
  REQUIRE_MESSAGE(first.code == 0, first.err);
  const auto second = nsr_run({"train", "--pool", (d / "pool").string(), "--resume", (d / "first").string(),
                               "--steps", "4", "--seed", "2", "--set", "log_every=2", "--out",
                               (d / "second").string()});
  REQUIRE_MESSAGE(second.code == 0, second.err);
  const auto t1 = lines(slurp(d / "first/trace.csv"));
  const auto t2 = lines(slurp(d / "second/trace.csv"));
  CHECK(t1[0] == "step,train_loss,val_loss,wall_seconds");
  REQUIRE(t1.size() == 3);
  CHECK(t1[1].rfind("3,", 0) == 0);
  CHECK(t1[2].rfind("6,", 0) == 0);
  REQUIRE(t2.size() == 3);
  CHECK(t2[1].rfind("8,", 0) == 0);
  CHECK(t2[2].rfind("10,", 0) == 0);
  CHECK(model::load_checkpoint(d / "second/checkpoint.bin").adam->step == 10);

  // Skeletons longer than the decoder can emit are refused up front.
  std::ofstream(d / "short.cfg") << "preset = toy\nmax_target_len = 3\n";
  const auto refused = nsr_run({"train", "--pool", (d / "pool").string(), "--model-config",
                                (d / "short.cfg").string(), "--steps", "1", "--out", (d / "y").string()});
  CHECK(refused.code == 2);
  CHECK(refused.err.find("max_target_len") != std::string::npos);
}

TEST_CASE("point CSV reader") {
  std::istringstream ok("# comment\ny, x2 ,x1\n3,2,1\n\n6,5,4\n");
  const auto t = cli::read_points_csv(ok, "t");
  REQUIRE(t.x.size() == 2);
  CHECK(t.x[0] == std::vector<double>{1, 4});
  CHECK(t.x[1] == std::vector<double>{2, 5});
  CHECK(t.y == std::vector<double>{3, 6});

  std::istringstream gap("x3,y\n1,2\n");
  const auto g = cli::read_points_csv(gap, "g");
  REQUIRE(g.x.size() == 3);
  CHECK(g.x[0] == std::vector<double>{0});
  CHECK(g.x[2] == std::vector<double>{1});

  const auto throws_line = [](const std::string& text, const std::string& where) {
    std::istringstream in(text);
    try {
      cli::read_points_csv(in, "f.csv");
    } catch (const ParseError& e) {
      return std::string(e.what()).find(where) != std::string::npos;
    }
    return false;
  };
  CHECK(throws_line("x1,y\n1,2\n1\n", "line 3"));
  CHECK(throws_line("x1,y\n1,nan\n", "line 2"));
  CHECK(throws_line("x1,y\n1,2x\n", "line 2"));
  CHECK(throws_line("x1,q\n", "line 1"));
  CHECK(throws_line("x1,x1,y\n", "line 1"));
  CHECK(throws_line("x1,x2\n", "line 1"));
  CHECK(throws_line("x1,y\n", "no data"));
  std::istringstream wide("x1,x2,x3,x4,y\n1,2,3,4,5\n");
  CHECK_THROWS_AS(cli::read_points_csv(wide, "w"), TooManyVariables);
}

TEST_CASE("regress recovers the trained skeleton and reports candidates") {
  const fs::path d = scratch("regress");
  write_csv(d / "sum.csv", "x1 + x2", 40);
  const auto r = nsr_run({"regress", "--checkpoint", trained_dir().string(), "--data", (d / "sum.csv").string(),
                          "--beam", "4", "--threads", "1", "--out", (d / "out").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(slurp(d / "out/report.jsonl"));
  REQUIRE(!rows.empty());
  const json best = json::parse(rows[0]);
  CHECK(best.at("rank") == 1);
  CHECK(best.at("mse").get<double>() < 1e-10);
  CHECK(expr::to_infix(expr::parse_infix(best.at("skeleton").get<std::string>())) ==
        expr::to_infix(expr::parse_infix("x1 + x2")));
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(json::parse(rows[i]).at("score").get<double>() >= json::parse(rows[i - 1]).at("score").get<double>());
  CHECK(r.out.find("best: ") == 0);
  CHECK(cli::read_manifest(d / "out/manifest.json").artifacts == std::vector<std::string>{"report.jsonl"});
}

TEST_CASE("regress with beam 1 reports the greedy decode") {
  const fs::path d = scratch("greedy");
  write_csv(d / "sum.csv", "x1 + x2", 30);
  const auto r = nsr_run({"regress", "--checkpoint", trained_dir().string(), "--data", (d / "sum.csv").string(),
                          "--beam", "1", "--out", d.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(slurp(d / "report.jsonl"));
  REQUIRE(rows.size() == 1);

  std::ifstream in(d / "sum.csv");
  const auto table = cli::read_points_csv(in, "sum.csv");
  const auto ck = model::load_checkpoint(trained_dir() / "checkpoint.bin");
  const model::Network<float> net(ck.config, ck.params);
  expr::Columns cols;
  for (std::size_t j = 0; j < 3; ++j) cols.x[j] = j < table.x.size() ? table.x[j] : std::vector<double>(table.y.size());
  const auto z = net.encode(datagen::encode_points(cols, table.y), static_cast<int>(table.y.size()));
  auto greedy = inference::greedy_decode(net, z);
  std::vector<int> body;
  for (auto t : greedy)
    if (t != static_cast<expr::TokenId>(expr::Symbol::Sos) && t != static_cast<expr::TokenId>(expr::Symbol::Eos))
      body.push_back(static_cast<int>(t));
  CHECK(json::parse(rows[0]).at("prefix").get<std::vector<int>>() == body);
}

TEST_CASE("regress input errors") {
  const fs::path d = scratch("regress_bad");
  std::ofstream(d / "bad.csv") << "x1,y\n1,2\n3,abc\n";
  const auto bad = nsr_run({"regress", "--checkpoint", trained_dir().string(), "--data", (d / "bad.csv").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("line 3") != std::string::npos);
  CHECK(nsr_run({"regress", "--checkpoint", trained_dir().string(), "--data", (d / "nope.csv").string()}).code == 2);
  std::ofstream(d / "wide.csv") << "x1,x2,x3,x4,y\n1,2,3,4,5\n";
  CHECK(nsr_run({"regress", "--checkpoint", trained_dir().string(), "--data", (d / "wide.csv").string()}).code == 2);
  write_csv(d / "ok.csv", "x1", 10);
  std::ofstream(d / "junk.bin") << "not a checkpoint";
  CHECK(nsr_run({"regress", "--checkpoint", (d / "junk.bin").string(), "--data", (d / "ok.csv").string()}).code == 2);
  CHECK(nsr_run({"regress", "--checkpoint", trained_dir().string(), "--data", (d / "ok.csv").string(), "--beam",
                 "0"})
            .code == 2);
}

TEST_CASE("eval with the oracle regressor scores 1 on the bundled suites and sweeps settings") {
  const fs::path d = scratch("eval");
  const auto r = nsr_run({"eval", "--suite", "aif", "--regressor", "oracle", "--points", "32,128", "--seed", "4",
                          "--out", d.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(d / "aif_oracle_points32.csv"));
  CHECK(fs::exists(d / "aif_oracle_points128.csv"));
  const auto summary = lines(slurp(d / "summary.csv"));
  REQUIRE(summary.size() == 3);
  CHECK(summary[1].rfind("aif,oracle,0,32,52,1,0,1,0,1,0,1,0,", 0) == 0);
  const auto report = lines(slurp(d / "aif_oracle_points128.csv"));
  CHECK(report[0] == "name,a1_iid,a1_ood,a2_iid,a2_ood,wall_seconds,predicted_infix");
  CHECK(report.size() == 52 + 3);

  const auto n = nsr_run({"eval", "--suite", "nguyen", "--regressor", "oracle", "--out", (d / "ng").string()});
  REQUIRE(n.code == 0);
  CHECK(lines(slurp(d / "ng/summary.csv"))[1].rfind("nguyen,oracle,0,128,12,1,0,1,0,1,0,1,0,", 0) == 0);

  CHECK(nsr_run({"eval", "--suite", "soose-wc", "--regressor", "oracle", "--out", d.string()}).code == 2);
  CHECK(nsr_run({"eval", "--suite", "aif", "--regressor", "neural", "--out", d.string()}).code == 2);
  CHECK(nsr_run({"eval", "--suite", "aif", "--regressor", "magic", "--out", d.string()}).code == 2);
}

TEST_CASE("eval sweeps beam sizes for the neural regressor and runs gp") {
  const fs::path d = scratch("eval_neural");
  const auto r = nsr_run({"eval", "--suite", "aif", "--regressor", "neural", "--checkpoint",
                          trained_dir().string(), "--beam", "1,2", "--points", "20", "--limit", "3", "--restarts",
                          "1", "--out", d.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(d / "aif_neural_beam1_points20.csv"));
  CHECK(fs::exists(d / "aif_neural_beam2_points20.csv"));
  const auto summary = lines(slurp(d / "summary.csv"));
  REQUIRE(summary.size() == 3);
  CHECK(summary[1].rfind("aif,neural,1,20,3,", 0) == 0);
  CHECK(summary[2].rfind("aif,neural,2,20,3,", 0) == 0);

  const auto g = nsr_run({"eval", "--suite", "aif", "--regressor", "gp", "--limit", "2", "--set",
                          "population_size=32", "--set", "generations=2", "--out", (d / "gp").string()});
  REQUIRE_MESSAGE(g.code == 0, g.err);
  CHECK(lines(slurp(d / "gp/aif_gp_points128.csv")).size() == 2 + 3);
}

TEST_CASE("soose-build writes a disjoint suite of the requested size") {
  const fs::path d = scratch("soose");
  REQUIRE(nsr_run({"gen-pool", "--count", "400", "--seed", "9", "--out", (d / "train").string()}).code == 0);
  const auto train = datagen::read_pool(d / "train/pool.jsonl");
  for (const std::string variant : {"wc", "nc", "fc"}) {
    const fs::path out = d / variant;
    const auto r = nsr_run({"soose-build", "--train-pool", (d / "train").string(), "--count", "25", "--variant",
                            variant, "--seed", "3", "--out", out.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("disjoint from training pool: 25/25") != std::string::npos);
    const auto suite = eval::read_suite(out / "suite.jsonl");
    CHECK(suite.size() == 25);
    bool any_real = false;
    for (const auto& rec : suite.records) {
      REQUIRE(rec.skeleton);
      for (const auto& t : train.skeletons) CHECK_FALSE(t.expr == rec.skeleton->expr);
      for (const auto& node : rec.expr.nodes()) any_real |= node.symbol == expr::Symbol::Real;
    }
    if (variant == "nc") CHECK_FALSE(any_real);
    if (variant == "fc") CHECK(any_real);
    const auto ev = nsr_run({"eval", "--suite", "soose-" + variant, "--suite-file", out.string(), "--regressor",
                             "oracle", "--out", (out / "eval").string()});
    REQUIRE_MESSAGE(ev.code == 0, ev.err);
    CHECK(lines(slurp(out / "eval/summary.csv"))[1].find(",25,1,0,1,0,1,0,1,0,") != std::string::npos);
  }
  CHECK(nsr_run({"soose-build", "--train-pool", (d / "train").string(), "--variant", "xx", "--out", d.string()})
            .code == 2);
}

TEST_CASE("rerun replays a manifest into a new directory") {
  const fs::path d = scratch("rerun");
  REQUIRE(nsr_run({"gen-pool", "--count", "80", "--seed", "12", "--set", "max_internal_nodes=4", "--out",
                   (d / "a").string()})
              .code == 0);
  const auto r = nsr_run({"rerun", "--manifest", (d / "a/manifest.json").string(), "--out", (d / "b").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(d / "a/pool.jsonl") == slurp(d / "b/pool.jsonl"));
  const auto ma = cli::read_manifest(d / "a/manifest.json");
  const auto mb = cli::read_manifest(d / "b/manifest.json");
  CHECK(ma.config == mb.config);
  CHECK(nsr_run({"rerun", "--manifest", (d / "none.json").string(), "--out", d.string()}).code != 0);
}
