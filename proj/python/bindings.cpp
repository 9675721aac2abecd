#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "nsr/cli/commands.hpp"
#include "nsr/cli/manifest.hpp"
#include "nsr/datagen/generator.hpp"
#include "nsr/error.hpp"
#include "nsr/eval/metrics.hpp"
#include "nsr/eval/suites.hpp"
#include "nsr/gp/evolve.hpp"
#include "nsr/inference/regress.hpp"
#include "nsr/model/checkpoint.hpp"

namespace py = pybind11;
using namespace nsr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (n, k) or (n,) array -> columns, k <= 3.
expr::Columns to_columns(const Array& x) {
  if (x.ndim() != 1 && x.ndim() != 2) throw InvalidConfig("X must be 1- or 2-dimensional");
  const auto n = static_cast<std::size_t>(x.shape(0));
  const auto k = x.ndim() == 1 ? std::size_t{1} : static_cast<std::size_t>(x.shape(1));
  if (k > static_cast<std::size_t>(expr::kMaxVariables))
    throw TooManyVariables("X has " + std::to_string(k) + " columns; at most 3 are supported");
  expr::Columns c;
  for (auto& col : c.x) col.assign(n, 0.0);
  const double* d = x.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) c.x[j][i] = d[i * k + j];
  return c;
}

std::vector<double> to_vector(const Array& y) {
  if (y.ndim() != 1) throw InvalidConfig("y must be 1-dimensional");
  return {y.data(), y.data() + y.size()};
}

py::array_t<double> to_array(const std::vector<double>& v) {
  return py::array_t<double>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())}, v.data());
}

// The network points into ckpt, so a Model never moves.
struct Model {
  model::Checkpoint ckpt;
  model::Network<float> net;

  explicit Model(model::Checkpoint c) : ckpt(std::move(c)), net(ckpt.config, ckpt.params) {}
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
};

py::dict regress(const Model& m, const Array& x, const Array& y, int beam_size, int restarts, double penalty,
                 std::uint64_t seed, int threads) {
  inference::InferenceConfig ic;
  ic.beam_size = beam_size;
  ic.bfgs_restarts = restarts;
  ic.token_penalty = penalty;
  ic.seed = seed;
  ic.threads = threads;
  const auto cols = to_columns(x);
  const auto yy = to_vector(y);
  const auto k = x.ndim() == 1 ? std::size_t{1} : static_cast<std::size_t>(x.shape(1));
  const std::vector<std::vector<double>> xs(cols.x.begin(), cols.x.begin() + static_cast<std::ptrdiff_t>(k));
  inference::RegressResult r;
  {
    py::gil_scoped_release release;
    r = inference::regress(m.net, xs, yy, ic);
  }
  py::list candidates;
  for (const auto& c : r.report.candidates) {
    py::dict d;
    d["skeleton"] = expr::to_infix(c.skeleton.expr);
    d["expression"] = c.fitted ? expr::to_infix(*c.fitted) : std::string();
    d["log_likelihood"] = c.log_likelihood;
    d["mse"] = c.mse ? *c.mse : std::nan("");
    d["score"] = c.score ? *c.score : std::nan("");
    candidates.append(d);
  }
  py::dict out;
  out["expression"] = r.expression;
  out["infix"] = expr::to_infix(r.expression);
  out["mse"] = *r.best.mse;
  out["candidates"] = candidates;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Neural symbolic regression core";
  m.attr("__version__") = cli::kToolVersion;

  py::register_exception<Error>(m, "NsrError", PyExc_ValueError);

  py::class_<expr::Expression>(m, "Expression")
      .def_property_readonly("infix", [](const expr::Expression& e) { return expr::to_infix(e); })
      .def_property_readonly("prefix", [](const expr::Expression& e) {
        std::vector<int> ids;
        for (auto t : expr::to_prefix(e)) ids.push_back(static_cast<int>(t));
        return ids;
      })
      .def("__len__", &expr::Expression::size)
      .def("simplify", [](const expr::Expression& e) { return expr::simplify(e); })
      .def("skeleton", [](const expr::Expression& e) { return expr::to_infix(expr::skeletonize(e).expr); })
      .def("__call__", [](const expr::Expression& e, const Array& x) {
        return to_array(expr::Evaluator(e).run(to_columns(x)));
      }, py::arg("X"), "Evaluate on the rows of X (columns x1, x2, x3).")
      .def("__eq__", [](const expr::Expression& a, const expr::Expression& b) { return a == b; })
      .def("__repr__", [](const expr::Expression& e) { return "Expression('" + expr::to_infix(e) + "')"; })
      .def("__str__", [](const expr::Expression& e) { return expr::to_infix(e); });

  m.def("parse", [](const std::string& s) { return expr::parse_infix(s); }, py::arg("infix"));

  m.def(
      "sample_pool",
      [](std::size_t count, std::uint64_t seed, int max_internal_nodes) {
        datagen::GeneratorConfig g;
        g.max_internal_nodes = max_internal_nodes;
        g.seed = seed;
        Rng rng(seed);
        std::vector<std::string> out;
        for (const auto& s : datagen::build_pool(g, count, rng).skeletons) out.push_back(expr::to_infix(s.expr));
        return out;
      },
      py::arg("count"), py::arg("seed") = 0, py::arg("max_internal_nodes") = 5,
      "Skeletons (as infix strings) from the random generator.");

  py::class_<Model, std::unique_ptr<Model>>(m, "Model")
      .def_static("load", [](const std::string& path) { return std::make_unique<Model>(model::load_checkpoint(path)); },
                  py::arg("path"))
      .def_property_readonly("parameter_count", [](const Model& mo) { return mo.ckpt.params.scalar_count(); })
      .def("regress", &regress, py::arg("X"), py::arg("y"), py::arg("beam_size") = 32, py::arg("restarts") = 4,
           py::arg("penalty") = 1e-14, py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "gp_fit",
      [](const Array& x, const Array& y, int population_size, int generations, std::uint64_t seed) {
        gp::GpConfig cfg;
        cfg.population_size = population_size;
        cfg.generations = generations;
        cfg.seed = seed;
        cfg.validate();
        const auto cols = to_columns(x);
        const auto yy = to_vector(y);
        const int k = x.ndim() == 1 ? 1 : static_cast<int>(x.shape(1));
        Rng rng(seed);
        gp::EvolveResult r;
        {
          py::gil_scoped_release release;
          r = gp::evolve(cfg, cols, k, yy, rng);
        }
        py::list trace;
        for (const auto& s : r.trace) trace.append(py::make_tuple(s.generation, s.best_fitness, s.mean_fitness));
        return py::make_tuple(gp::to_expression(r.best.program), r.best.fitness, trace);
      },
      py::arg("X"), py::arg("y"), py::arg("population_size") = 1024, py::arg("generations") = 20,
      py::arg("seed") = 0, "Returns (expression, fitness, [(generation, best, mean), ...]).");

  m.def("a1_fraction", [](const Array& y, const Array& yhat) {
    return eval::a1_fraction(to_vector(y), to_vector(yhat), eval::MetricConfig{});
  });
  m.def("r2_score", [](const Array& y, const Array& yhat) { return eval::r2_score(to_vector(y), to_vector(yhat)); });

  m.def(
      "load_suite",
      [](const std::string& name) {
        const auto s = name == "aif" ? eval::load_aif() : name == "nguyen" ? eval::load_nguyen() : eval::read_suite(name);
        py::list out;
        for (const auto& r : s.records) {
          py::dict d;
          d["name"] = r.name;
          d["expression"] = r.expr;
          py::list sup;
          for (const auto& iv : r.supports)
            sup.append(iv ? py::object(py::make_tuple(iv->lo, iv->hi)) : py::object(py::none()));
          d["support"] = sup;
          d["unreachable"] = r.unreachable;
          out.append(d);
        }
        return out;
      },
      py::arg("name"), "'aif', 'nguyen' or a suite file path.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run an nsr subcommand; returns (exit_code, stdout, stderr).");
}
