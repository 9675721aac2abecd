#include "nsr/gp/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include "nsr/error.hpp"

namespace nsr::gp {

void GpConfig::validate() const {
  if (population_size < 2) throw InvalidConfig("population_size must be >= 2");
  if (tournament_size < 1) throw InvalidConfig("tournament_size must be >= 1");
  const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(mutation_prob) || !prob(crossover_prob) || !prob(point_replace_prob))
    throw InvalidConfig("probabilities must lie in [0, 1]");
  if (mutation_prob + crossover_prob > 1.0) throw InvalidConfig("mutation_prob + crossover_prob must be <= 1");
  if (!(constant_range.lo < constant_range.hi)) throw InvalidConfig("constant_range must be nonempty");
  if (generations < 0) throw InvalidConfig("generations must be >= 0");
  if (function_set.empty()) throw InvalidConfig("function_set is empty");
  for (GpOp op : function_set)
    if (arity(op) == 0) throw InvalidConfig("function_set holds a terminal");
  if (init_depth_min < 0 || init_depth_max < init_depth_min) throw InvalidConfig("bad init depth range");
  if (max_depth < init_depth_max) throw InvalidConfig("max_depth must be >= init_depth_max");
  if (!(parsimony_coefficient >= 0.0)) throw InvalidConfig("parsimony_coefficient must be >= 0");
  if (threads < 1) throw InvalidConfig("threads must be >= 1");
}

namespace {

GpNode random_terminal(const GpConfig& cfg, int n_variables, Rng& rng) {
  const auto pick = uniform_int(rng, 0, n_variables);  // n_variables means a constant
  if (pick < n_variables) return GpNode{GpOp::Var, static_cast<int>(pick), 0.0};
  return GpNode{GpOp::Const, 0, uniform(rng, cfg.constant_range.lo, cfg.constant_range.hi)};
}

GpOp random_function(const GpConfig& cfg, Rng& rng) {
  return cfg.function_set[static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<std::int64_t>(cfg.function_set.size()) - 1))];
}

// Full trees have every leaf at max_depth; grow picks terminals with their
// share of the combined function + terminal set.
void grow(const GpConfig& cfg, int n_variables, int max_depth, bool full, int d, Rng& rng, Program& out) {
  const double functions = static_cast<double>(cfg.function_set.size());
  const double terminals = static_cast<double>(n_variables + 1);
  const bool terminal =
      d >= max_depth || (!full && d > 0 && uniform01(rng) < terminals / (terminals + functions));
  if (terminal) {
    out.push_back(random_terminal(cfg, n_variables, rng));
    return;
  }
  const GpOp op = random_function(cfg, rng);
  out.push_back(GpNode{op, 0, 0.0});
  for (int k = 0; k < arity(op); ++k) grow(cfg, n_variables, max_depth, full, d + 1, rng, out);
}

void score(std::vector<Individual>& pop, const GpConfig& cfg, const expr::Columns& x, std::span<const double> y) {
  const auto one = [&](std::size_t i) {
    Individual& ind = pop[i];
    ind.fitness = fitness(ind.program, x, y, cfg.metric);
    ind.penalized = ind.fitness + cfg.parsimony_coefficient * static_cast<double>(ind.program.size());
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), pop.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < pop.size(); ++i) one(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < pop.size(); i += workers) one(i);
    });
  for (auto& t : pool) t.join();
}

std::size_t best_index(const std::vector<Individual>& pop) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pop.size(); ++i)
    if (pop[i].fitness < pop[best].fitness) best = i;
  return best;
}

GenerationStats stats(const std::vector<Individual>& pop, int generation) {
  GenerationStats s{generation, pop[best_index(pop)].fitness, 0.0};
  for (const Individual& ind : pop) s.mean_fitness += ind.fitness / static_cast<double>(pop.size());
  return s;
}

}  // namespace

Program random_program(const GpConfig& cfg, int n_variables, int max_depth, bool full, Rng& rng) {
  Program p;
  grow(cfg, n_variables, max_depth, full, 0, rng, p);
  return p;
}

// Koza: internal nodes are picked 90% of the time when there are any.
static std::size_t random_node(const Program& p, Rng& rng) {
  std::vector<std::size_t> internal, leaves;
  for (std::size_t i = 0; i < p.size(); ++i) (arity(p[i].op) ? internal : leaves).push_back(i);
  const auto& from = (!internal.empty() && uniform01(rng) < 0.9) ? internal : leaves;
  return from[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(from.size()) - 1))];
}

Program crossover(const Program& parent, const Program& donor, int max_depth, Rng& rng) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    const std::size_t a = random_node(parent, rng);
    const std::size_t b = random_node(donor, rng);
    Program child(parent.begin(), parent.begin() + static_cast<std::ptrdiff_t>(a));
    child.insert(child.end(), donor.begin() + static_cast<std::ptrdiff_t>(b),
                 donor.begin() + static_cast<std::ptrdiff_t>(subtree_end(donor, b)));
    child.insert(child.end(), parent.begin() + static_cast<std::ptrdiff_t>(subtree_end(parent, a)), parent.end());
    if (depth(child) <= max_depth) return child;
  }
  return parent;
}

Program point_mutation(const Program& parent, const GpConfig& cfg, int n_variables, Rng& rng) {
  Program child = parent;
  for (GpNode& n : child) {
    if (uniform01(rng) >= cfg.point_replace_prob) continue;
    const int a = arity(n.op);
    if (a == 0) {
      n = random_terminal(cfg, n_variables, rng);
      continue;
    }
    std::vector<GpOp> same;
    for (GpOp op : cfg.function_set)
      if (arity(op) == a) same.push_back(op);
    n.op = same[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(same.size()) - 1))];
  }
  return child;
}

std::vector<Individual> init_population(const GpConfig& cfg, int n_variables, Rng& rng) {
  cfg.validate();
  if (n_variables < 1) throw InvalidConfig("GP needs at least one variable");
  std::vector<Individual> pop(static_cast<std::size_t>(cfg.population_size));
  const int depths = cfg.init_depth_max - cfg.init_depth_min + 1;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const int d = cfg.init_depth_min + static_cast<int>(i % static_cast<std::size_t>(depths));
    const bool full = (i / static_cast<std::size_t>(depths)) % 2 == 0;
    pop[i].program = random_program(cfg, n_variables, d, full, rng);
  }
  return pop;
}

double fitness(const Program& p, const expr::Columns& x, std::span<const double> y, FitnessMetric metric) {
  const std::vector<double> pred = execute(p, x);
  const double n = static_cast<double>(y.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = std::abs(pred[i] - y[i]);
    acc += (metric == FitnessMetric::MAE ? std::min(e, kMagnitudeCap) : std::min(e * e, kMagnitudeCap)) / n;
  }
  return acc;
}

std::size_t tournament(std::span<const Individual> population, int k, Rng& rng) {
  const std::size_t n = population.size();
  const std::size_t draws = std::min<std::size_t>(static_cast<std::size_t>(k), n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::size_t best = n;
  for (std::size_t d = 0; d < draws; ++d) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(d), static_cast<std::int64_t>(n) - 1));
    std::swap(idx[d], idx[j]);
    const std::size_t c = idx[d];
    if (best == n || population[c].penalized < population[best].penalized ||
        (population[c].penalized == population[best].penalized && c < best))
      best = c;
  }
  return best;
}

EvolveResult evolve(const GpConfig& cfg, const expr::Columns& x, int n_variables, std::span<const double> y,
                    Rng& rng) {
  cfg.validate();
  if (y.empty() || x.size() != y.size()) throw InvalidConfig("GP needs nonempty X and Y of equal length");
  if (n_variables < 1 || n_variables > expr::kMaxVariables) throw InvalidConfig("n_variables must be in 1..3");
  for (double v : y)
    if (!std::isfinite(v)) throw InvalidConfig("GP targets must be finite");

  EvolveResult result;
  std::vector<Individual> pop = init_population(cfg, n_variables, rng);
  score(pop, cfg, x, y);
  result.best = pop[best_index(pop)];
  result.trace.push_back(stats(pop, 0));

  for (int g = 1; g <= cfg.generations; ++g) {
    std::vector<Individual> next;
    next.reserve(pop.size());
    next.push_back(pop[best_index(pop)]);  // elitism
    while (next.size() < pop.size()) {
      const Program& parent = pop[tournament(pop, cfg.tournament_size, rng)].program;
      const double u = uniform01(rng);
      Individual child;
      if (u < cfg.crossover_prob) {
        const Program& donor = pop[tournament(pop, cfg.tournament_size, rng)].program;
        child.program = crossover(parent, donor, cfg.max_depth, rng);
      } else if (u < cfg.crossover_prob + cfg.mutation_prob) {
        child.program = point_mutation(parent, cfg, n_variables, rng);
      } else {
        child.program = parent;
      }
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    score(pop, cfg, x, y);
    const Individual& gen_best = pop[best_index(pop)];
    if (gen_best.fitness < result.best.fitness) result.best = gen_best;
    result.trace.push_back(stats(pop, g));
  }
  return result;
}

void write_trace_csv(const std::vector<GenerationStats>& trace, std::ostream& out) {
  out << "generation,best_fitness,mean_fitness\n";
  const auto old = out.precision(17);
  for (const auto& s : trace) out << s.generation << ',' << s.best_fitness << ',' << s.mean_fitness << '\n';
  out.precision(old);
}

std::function<expr::Expression(const expr::Columns&, std::span<const double>)> as_regressor(GpConfig cfg) {
  cfg.validate();
  return [cfg](const expr::Columns& x, std::span<const double> y) {
    int n_variables = 1;
    for (int j = 0; j < expr::kMaxVariables; ++j) {
      const auto& col = x.x[static_cast<std::size_t>(j)];
      if (std::any_of(col.begin(), col.end(), [](double v) { return v != 0.0; })) n_variables = j + 1;
    }
    Rng rng(cfg.seed);
    return to_expression(evolve(cfg, x, n_variables, y, rng).best.program);
  };
}

}  // namespace nsr::gp
