#include "nsr/cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "nsr/cli/keyvalue.hpp"
#include "nsr/cli/manifest.hpp"
#include "nsr/datagen/pool_io.hpp"
#include "nsr/error.hpp"
#include "nsr/eval/benchmark.hpp"
#include "nsr/gp/evolve.hpp"
#include "nsr/inference/regress.hpp"
#include "nsr/model/checkpoint.hpp"

namespace nsr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int default_threads() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

// Options every command shares.
struct Common {
  std::uint64_t seed = 0;
  int threads = default_threads();
  std::string config_file;
  std::vector<std::string> sets;
  std::string out_dir;

  void add_to(CLI::App* app, bool out_required) {
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--threads", threads, "Worker threads (default: available cores)")->check(CLI::PositiveNumber);
    app->add_option("--config", config_file, "key = value config file");
    app->add_option("--set", sets, "Config override key=value (repeatable)");
    auto* o = app->add_option("--out", out_dir, "Output directory");
    if (out_required) o->required();
  }

  KeyValues settings() const {
    KeyValues kv = config_file.empty() ? KeyValues{} : KeyValues::load(config_file);
    for (const auto& s : sets) kv.set(s);
    return kv;
  }
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::string command;
  std::vector<std::string> args;
};

fs::path prepare_out(const std::string& dir) {
  const fs::path p(dir);
  fs::create_directories(p);
  return p;
}

RunManifest begin_manifest(const Context& ctx, std::uint64_t seed) {
  RunManifest m;
  m.command = ctx.command;
  m.args = ctx.args;
  m.seed = seed;
  m.started = utc_now();
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& dir) {
  m.finished = utc_now();
  write_manifest(dir, m);
}

// A pool argument may name the file or a gen-pool output directory.
fs::path resolve(const std::string& arg, const char* default_name) {
  const fs::path p(arg);
  if (fs::is_directory(p)) return p / default_name;
  return p;
}

// ---------------------------------------------------------------- gen-pool

struct GenPoolArgs {
  Common common;
  std::size_t count = 0;
};

int gen_pool(const Context& ctx, const GenPoolArgs& a) {
  KeyValues kv = a.common.settings();
  datagen::GeneratorConfig g;
  apply(kv, g);
  kv.require_consumed();
  g.seed = a.common.seed;

  Rng rng(a.common.seed);
  RunManifest m = begin_manifest(ctx, a.common.seed);
  const datagen::SkeletonPool pool = datagen::build_pool(g, a.count, rng);
  const fs::path dir = prepare_out(a.common.out_dir);
  datagen::write_pool(pool, dir / "pool.jsonl");

  const auto& st = pool.stats;
  const double unique_fraction = st.total ? static_cast<double>(st.unique) / static_cast<double>(st.total) : 0.0;
  ctx.out << "skeletons: " << st.total << "\nunique: " << st.unique << " (" << std::setprecision(4)
          << unique_fraction << ")\nmean_length: " << st.mean_length << '\n';

  m.config = {{"generator", snapshot(g)}, {"count", a.count}};
  m.artifacts = {"pool.jsonl"};
  finish_manifest(m, dir);
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string pool;
  std::string val_pool;
  int steps = 1000;
  std::string model_config = "desk";
  std::string resume;
};

int train_cmd(const Context& ctx, const TrainArgs& a) {
  KeyValues kv = a.common.settings();
  datagen::BatchSpec spec;
  model::AdamConfig adam_cfg;
  model::TrainConfig tc;
  int validation_batches = 4;
  apply(kv, spec);
  apply(kv, adam_cfg);
  apply(kv, tc);
  kv.take("validation_batches", validation_batches);
  kv.require_consumed();
  tc.steps = a.steps;
  tc.threads = a.common.threads;
  tc.seed = a.common.seed;
  if (a.steps < 0) throw InvalidConfig("--steps must be >= 0");

  model::Checkpoint ckpt;
  if (!a.resume.empty()) {
    ckpt = model::load_checkpoint(resolve(a.resume, "checkpoint.bin"));
    if (!ckpt.adam) ckpt.adam = model::AdamState<float>::for_params(ckpt.params);
  } else {
    if (fs::is_regular_file(a.model_config)) {
      KeyValues mkv = KeyValues::load(a.model_config);
      apply(mkv, ckpt.config);
      mkv.require_consumed();
    } else {
      ckpt.config = model_preset(a.model_config);
    }
    Rng init_rng = split_stream(a.common.seed, 0);
    ckpt.params = model::init_parameters<float>(ckpt.config, init_rng);
    ckpt.adam = model::AdamState<float>::for_params(ckpt.params);
  }

  const datagen::SkeletonPool pool = datagen::read_pool(resolve(a.pool, "pool.jsonl"));
  if (pool.skeletons.empty()) throw InvalidConfig("training pool is empty");
  std::optional<datagen::SkeletonPool> val;
  if (!a.val_pool.empty()) val = datagen::read_pool(resolve(a.val_pool, "pool.jsonl"));
  const auto check_lengths = [&](const datagen::SkeletonPool& p) {
    for (const auto& s : p.skeletons)
      if (static_cast<int>(expr::expr_length(s)) > ckpt.config.max_target_len - 1)
        throw InvalidConfig("pool skeleton of length " + std::to_string(expr::expr_length(s)) +
                            " exceeds max_target_len - 1 = " + std::to_string(ckpt.config.max_target_len - 1));
  };
  check_lengths(pool);
  if (val) check_lengths(*val);

  RunManifest m = begin_manifest(ctx, a.common.seed);
  const fs::path dir = prepare_out(a.common.out_dir);
  const auto trace = model::train(ckpt.config, ckpt.params, *ckpt.adam, pool, spec, val ? &*val : nullptr,
                                  validation_batches, tc, adam_cfg);
  ckpt.metadata = {{"step", ckpt.adam->step}, {"seed", a.common.seed}};
  model::save_checkpoint(dir / "checkpoint.bin", ckpt);
  {
    std::ofstream csv(dir / "trace.csv");
    model::write_trace_csv(trace, csv);
  }
  if (!trace.rows.empty())
    ctx.out << "step " << trace.rows.back().step << " train_loss " << trace.rows.back().train_loss << '\n';
  if (trace.best_step >= 0) ctx.out << "best val_loss " << trace.best_val_loss << " at step " << trace.best_step << '\n';
  ctx.out << "parameters: " << ckpt.params.scalar_count() << '\n';

  json model_json;
  model::to_json(model_json, ckpt.config);
  m.config = {{"model", model_json},          {"batch", snapshot(spec)},
              {"adam", snapshot(adam_cfg)},   {"train", snapshot(tc)},
              {"validation_batches", validation_batches}};
  m.artifacts = {"checkpoint.bin", "trace.csv"};
  finish_manifest(m, dir);
  return kExitOk;
}

// ----------------------------------------------------------------- regress

struct RegressArgs {
  Common common;
  std::string checkpoint;
  std::string data;
  int beam = 32;
  int restarts = 4;
};

inference::InferenceConfig inference_config(KeyValues& kv, const Common& c) {
  inference::InferenceConfig ic;
  apply(kv, ic);
  ic.seed = c.seed;
  ic.threads = c.threads;
  return ic;
}

int regress_cmd(const Context& ctx, const RegressArgs& a) {
  KeyValues kv = a.common.settings();
  inference::InferenceConfig ic = inference_config(kv, a.common);
  kv.require_consumed();
  ic.beam_size = a.beam;
  ic.bfgs_restarts = a.restarts;
  ic.validate();

  std::ifstream in(a.data);
  if (!in) throw DataFileMissing("cannot open data file " + a.data);
  const PointTable table = read_points_csv(in, a.data);
  const model::Checkpoint ckpt = model::load_checkpoint(resolve(a.checkpoint, "checkpoint.bin"));
  const model::Network<float> net(ckpt.config, ckpt.params);

  RunManifest m = begin_manifest(ctx, a.common.seed);
  const inference::RegressResult r = inference::regress(net, table.x, table.y, ic);
  ctx.out << "best: " << expr::to_infix(r.expression) << "\nmse: " << *r.best.mse << "\nscore: " << *r.best.score
          << "\ncandidates: " << r.report.candidates.size() << " (dropped " << r.report.dropped << ", invalid beams "
          << r.report.invalid_beams << ")\n";
  inference::write_report(r.report, ctx.out);
  if (!a.common.out_dir.empty()) {
    const fs::path dir = prepare_out(a.common.out_dir);
    std::ofstream rep(dir / "report.jsonl");
    inference::write_report(r.report, rep);
    m.config = {{"inference", snapshot(ic)}, {"data", a.data}};
    m.artifacts = {"report.jsonl"};
    finish_manifest(m, dir);
  }
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::string suite = "aif";
  std::string suite_file;
  std::string regressor = "neural";
  std::string checkpoint;
  std::vector<int> beams{32};
  std::vector<int> points{128};
  int restarts = 4;
  std::size_t limit = 0;
};

eval::BenchmarkSuite load_named_suite(const std::string& name, const std::string& file) {
  if (!file.empty()) {
    eval::BenchmarkSuite s = eval::read_suite(resolve(file, "suite.jsonl"));
    s.name = name;
    return s;
  }
  if (name == "aif") return eval::load_aif();
  if (name == "nguyen") return eval::load_nguyen();
  if (name.rfind("soose", 0) == 0) throw InvalidConfig(name + " needs --suite-file (see soose-build)");
  if (fs::exists(name)) return eval::read_suite(name);
  throw InvalidConfig("unknown suite '" + name + "'");
}

// Identifies the record by its exact values on the test points.
eval::Regressor oracle_regressor(const eval::BenchmarkSuite& suite) {
  return [&suite](const expr::Columns& x, std::span<const double> y) {
    for (const auto& r : suite.records) {
      const auto v = expr::Evaluator(r.expr).run(x);
      if (std::equal(y.begin(), y.end(), v.begin())) return r.expr;
    }
    throw NoValidCandidate("oracle: no record reproduces the points");
  };
}

int eval_cmd(const Context& ctx, const EvalArgs& a) {
  KeyValues kv = a.common.settings();
  eval::MetricConfig metrics;
  apply(kv, metrics);
  inference::InferenceConfig ic = inference_config(kv, a.common);
  gp::GpConfig gpc;
  apply(kv, gpc);
  kv.require_consumed();
  ic.threads = 1;  // records run in parallel instead
  ic.bfgs_restarts = a.restarts;
  gpc.seed = a.common.seed;

  eval::BenchmarkSuite suite = load_named_suite(a.suite, a.suite_file);
  if (a.limit > 0 && a.limit < suite.records.size()) suite.records.resize(a.limit);

  std::optional<model::Checkpoint> ckpt;
  std::optional<model::Network<float>> net;
  if (a.regressor == "neural") {
    if (a.checkpoint.empty()) throw InvalidConfig("--regressor neural needs --checkpoint");
    ckpt = model::load_checkpoint(resolve(a.checkpoint, "checkpoint.bin"));
    net.emplace(ckpt->config, ckpt->params);
  } else if (a.regressor != "gp" && a.regressor != "oracle") {
    throw InvalidConfig("--regressor must be neural, gp or oracle");
  }
  for (int b : a.beams)
    if (b < 1) throw InvalidConfig("--beam values must be >= 1");
  for (int p : a.points)
    if (p < 1) throw InvalidConfig("--points values must be >= 1");

  RunManifest m = begin_manifest(ctx, a.common.seed);
  const fs::path dir = prepare_out(a.common.out_dir);
  std::ofstream summary(dir / "summary.csv");
  summary << "suite,regressor,beam,points,records,a1_iid,a1_iid_sem,a1_ood,a1_ood_sem,a2_iid,a2_iid_sem,a2_ood,"
             "a2_ood_sem,wall_seconds\n";
  m.artifacts.push_back("summary.csv");

  const std::vector<int> beams = a.regressor == "neural" ? a.beams : std::vector<int>{0};
  for (int beam : beams) {
    for (int pts : a.points) {
      eval::Regressor reg;
      if (a.regressor == "neural") {
        inference::InferenceConfig run_ic = ic;
        run_ic.beam_size = beam;
        reg = [&net, run_ic](const expr::Columns& x, std::span<const double> y) {
          return inference::regress(*net, {x.x[0], x.x[1], x.x[2]}, y, run_ic).expression;
        };
      } else if (a.regressor == "gp") {
        reg = gp::as_regressor(gpc);
      } else {
        reg = oracle_regressor(suite);
      }
      eval::BenchmarkConfig bc;
      bc.metrics = metrics;
      bc.test_points = pts;
      bc.threads = a.common.threads;
      bc.seed = a.common.seed;
      const eval::BenchmarkReport rep = eval::run_benchmark(reg, suite, bc);

      std::string name = a.suite + "_" + a.regressor;
      if (beam > 0) name += "_beam" + std::to_string(beam);
      name += "_points" + std::to_string(pts) + ".csv";
      std::ofstream csv(dir / name);
      eval::write_report_csv(rep, csv);
      m.artifacts.push_back(name);

      summary << a.suite << ',' << a.regressor << ',' << beam << ',' << pts << ',' << rep.rows.size() << ','
              << rep.a1_iid.mean << ',' << rep.a1_iid.sem << ',' << rep.a1_ood.mean << ',' << rep.a1_ood.sem << ','
              << rep.a2_iid.mean << ',' << rep.a2_iid.sem << ',' << rep.a2_ood.mean << ',' << rep.a2_ood.sem << ','
              << rep.wall_seconds.mean << '\n';
      ctx.out << name << ": A1 iid " << rep.a1_iid.mean << " ood " << rep.a1_ood.mean << ", A2 iid "
              << rep.a2_iid.mean << " ood " << rep.a2_ood.mean << '\n';
    }
  }

  m.config = {{"suite", a.suite},           {"regressor", a.regressor}, {"beams", a.beams},
              {"points", a.points},         {"limit", a.limit},         {"metrics", snapshot(metrics)},
              {"inference", snapshot(ic)},  {"gp", snapshot(gpc)}};
  finish_manifest(m, dir);
  return kExitOk;
}

// ------------------------------------------------------------- soose-build

struct SooseArgs {
  Common common;
  std::string train_pool;
  std::string pool;
  std::size_t count = 200;
  std::size_t source_count = 0;
  std::string variant;
};

int soose_cmd(const Context& ctx, const SooseArgs& a) {
  KeyValues kv = a.common.settings();
  datagen::GeneratorConfig g;
  datagen::BatchSpec spec;
  apply(kv, g);
  apply(kv, spec);
  kv.require_consumed();
  const eval::SooseVariant variant = eval::parse_soose_variant(a.variant);
  if (a.count == 0) throw InvalidConfig("--count must be positive");

  const datagen::SkeletonPool train = datagen::read_pool(resolve(a.train_pool, "pool.jsonl"));
  datagen::SkeletonPool source;
  std::size_t source_count = 0;
  if (!a.pool.empty()) {
    source = datagen::read_pool(resolve(a.pool, "pool.jsonl"));
  } else {
    source_count = a.source_count ? a.source_count : std::max<std::size_t>(20 * a.count, 2000);
    Rng src_rng = split_stream(a.common.seed, 1);
    source = datagen::build_pool(g, source_count, src_rng);
  }

  RunManifest m = begin_manifest(ctx, a.common.seed);
  Rng rng = split_stream(a.common.seed, 2);
  const eval::BenchmarkSuite suite = eval::build_soose(source, train, a.count, variant, rng, spec);

  // Re-check on a probe set the builder never saw.
  const datagen::ProbeSet probes = datagen::make_probe_set(split_stream(a.common.seed, 3)());
  std::vector<std::vector<double>> train_fp;
  for (const auto& s : train.skeletons) train_fp.push_back(datagen::numeric_fingerprint(s, probes));
  std::size_t disjoint = 0, constant_free = 0;
  for (const auto& r : suite.records) {
    const auto fp = datagen::numeric_fingerprint(*r.skeleton, probes);
    disjoint += std::none_of(train_fp.begin(), train_fp.end(),
                             [&](const auto& t) { return datagen::fingerprints_equal(fp, t); });
    constant_free += std::none_of(r.expr.nodes().begin(), r.expr.nodes().end(),
                                  [](const expr::Node& n) { return n.symbol == expr::Symbol::Real; });
  }

  const fs::path dir = prepare_out(a.common.out_dir);
  eval::write_suite(suite, dir / "suite.jsonl");
  ctx.out << "records: " << suite.size() << "\ndisjoint from training pool: " << disjoint << "/" << suite.size()
          << "\nrecords without real constants: " << constant_free << "/" << suite.size() << '\n';

  m.config = {{"variant", eval::to_string(variant)}, {"count", a.count},         {"source_count", source_count},
              {"generator", snapshot(g)},            {"batch", snapshot(spec)}, {"disjoint", disjoint}};
  m.artifacts = {"suite.jsonl"};
  finish_manifest(m, dir);
  return disjoint == suite.size() ? kExitOk : kExitRuntime;
}

bool is_usage_error(const std::exception& e) {
  return dynamic_cast<const InvalidConfig*>(&e) || dynamic_cast<const ParseError*>(&e) ||
         dynamic_cast<const DataFileMissing*>(&e) || dynamic_cast<const TooManyVariables*>(&e) ||
         dynamic_cast<const VersionMismatch*>(&e) || dynamic_cast<const CorruptCheckpoint*>(&e) ||
         dynamic_cast<const InsufficientDisjointSkeletons*>(&e);
}

}  // namespace

PointTable read_points_csv(std::istream& in, const std::string& source) {
  std::string line;
  int line_no = 0;
  std::vector<int> column_of;  // header position -> 0..2 for x1..x3, 3 for y
  const auto fail = [&](const std::string& what) { return ParseError(source + " line " + std::to_string(line_no) + ": " + what); };
  const auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r"), e = cell.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };

  PointTable t;
  int n_vars = 0;
  std::vector<std::vector<double>> cols(3);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto cells = split(line);
    if (column_of.empty()) {
      bool has_y = false;
      for (const auto& c : cells) {
        if (c == "y") {
          column_of.push_back(3);
          has_y = true;
        } else if (c == "x1" || c == "x2" || c == "x3") {
          const int j = c[1] - '1';
          if (std::count(column_of.begin(), column_of.end(), j)) throw fail("duplicate column " + c);
          column_of.push_back(j);
          n_vars = std::max(n_vars, j + 1);
        } else if (c.size() >= 2 && c[0] == 'x') {
          throw TooManyVariables(source + " line " + std::to_string(line_no) + ": column '" + c +
                                 "' is beyond the supported x1..x3");
        } else {
          throw fail("unknown column '" + c + "' (expected x1, x2, x3, y)");
        }
      }
      if (!has_y) throw fail("header has no y column");
      continue;
    }
    if (cells.size() != column_of.size())
      throw fail("expected " + std::to_string(column_of.size()) + " fields, got " + std::to_string(cells.size()));
    double row[4] = {0, 0, 0, 0};
    for (std::size_t k = 0; k < cells.size(); ++k) {
      double v = 0.0;
      const auto& c = cells[k];
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || ec != std::errc() || ptr != c.data() + c.size()) throw fail("'" + c + "' is not a number");
      if (!std::isfinite(v)) throw fail("non-finite value");
      row[column_of[k]] = v;
    }
    for (int j = 0; j < 3; ++j) cols[static_cast<std::size_t>(j)].push_back(row[j]);
    t.y.push_back(row[3]);
  }
  if (column_of.empty()) throw ParseError(source + ": no header line");
  if (t.y.empty()) throw ParseError(source + ": no data rows");
  t.x.assign(cols.begin(), cols.begin() + n_vars);
  return t;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural symbolic regression toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenPoolArgs gp_args;
  auto* c_gen = app.add_subcommand("gen-pool", "Generate a skeleton pool");
  gp_args.common.add_to(c_gen, true);
  c_gen->add_option("--count", gp_args.count, "Number of skeletons")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model on a skeleton pool");
  tr.common.add_to(c_train, true);
  c_train->add_option("--pool", tr.pool, "Training pool file or gen-pool directory")->required();
  c_train->add_option("--val-pool", tr.val_pool, "Validation pool");
  c_train->add_option("--steps", tr.steps, "Optimizer steps");
  c_train->add_option("--model-config", tr.model_config, "Preset (desk, toy, paper) or key = value file");
  c_train->add_option("--resume", tr.resume, "Continue from a checkpoint");

  RegressArgs rg;
  auto* c_reg = app.add_subcommand("regress", "Recover an equation from a point table");
  rg.common.add_to(c_reg, false);
  c_reg->add_option("--checkpoint", rg.checkpoint, "Checkpoint file or train directory")->required();
  c_reg->add_option("--data", rg.data, "CSV with x1..x3 and y columns")->required();
  c_reg->add_option("--beam", rg.beam, "Beam size")->check(CLI::PositiveNumber);
  c_reg->add_option("--restarts", rg.restarts, "BFGS restarts per candidate")->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Benchmark a regressor on a suite");
  ev.common.add_to(c_eval, true);
  c_eval->add_option("--suite", ev.suite, "aif, nguyen, soose-wc, soose-nc, soose-fc or a suite file");
  c_eval->add_option("--suite-file", ev.suite_file, "Suite file (needed for the soose suites)");
  c_eval->add_option("--regressor", ev.regressor, "neural, gp or oracle");
  c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint for the neural regressor");
  c_eval->add_option("--beam", ev.beams, "Beam sizes to sweep")->delimiter(',');
  c_eval->add_option("--points", ev.points, "Test-time point counts to sweep")->delimiter(',');
  c_eval->add_option("--restarts", ev.restarts, "BFGS restarts")->check(CLI::PositiveNumber);
  c_eval->add_option("--limit", ev.limit, "Only the first N records");

  SooseArgs so;
  auto* c_soose = app.add_subcommand("soose-build", "Build an out-of-sample suite disjoint from a training pool");
  so.common.add_to(c_soose, true);
  c_soose->add_option("--train-pool", so.train_pool, "Training pool to stay disjoint from")->required();
  c_soose->add_option("--pool", so.pool, "Source pool (default: generated)");
  c_soose->add_option("--count", so.count, "Records");
  c_soose->add_option("--source-count", so.source_count, "Size of the generated source pool");
  c_soose->add_option("--variant", so.variant, "wc, nc or fc")->required();

  std::string manifest_path, rerun_out;
  auto* c_rerun = app.add_subcommand("rerun", "Repeat the run recorded in a manifest");
  c_rerun->add_option("--manifest", manifest_path, "manifest.json of the original run")->required();
  c_rerun->add_option("--out", rerun_out, "New output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Context ctx{out, err, sub->get_name(), {}};
  const auto it = std::find(args.begin(), args.end(), ctx.command);
  if (it != args.end()) ctx.args.assign(it + 1, args.end());

  try {
    if (sub == c_gen) return gen_pool(ctx, gp_args);
    if (sub == c_train) return train_cmd(ctx, tr);
    if (sub == c_reg) return regress_cmd(ctx, rg);
    if (sub == c_eval) return eval_cmd(ctx, ev);
    if (sub == c_soose) return soose_cmd(ctx, so);
    // rerun: replay the recorded arguments with a new --out.
    const RunManifest m = read_manifest(manifest_path);
    std::vector<std::string> replay{m.command};
    bool replaced = false;
    for (std::size_t i = 0; i < m.args.size(); ++i) {
      if (m.args[i] == "--out" && i + 1 < m.args.size()) {
        replay.insert(replay.end(), {"--out", rerun_out});
        ++i;
        replaced = true;
      } else if (m.args[i].rfind("--out=", 0) == 0) {
        replay.push_back("--out=" + rerun_out);
        replaced = true;
      } else {
        replay.push_back(m.args[i]);
      }
    }
    if (!replaced) replay.insert(replay.end(), {"--out", rerun_out});
    return run(replay, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return is_usage_error(e) ? kExitUsage : kExitRuntime;
  }
}

}  // namespace nsr::cli
