#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "nsr/datagen/batch.hpp"
#include "nsr/gp/program.hpp"
#include "nsr/random.hpp"

namespace nsr::gp {

enum class FitnessMetric { MAE, MSE };

struct GpConfig {
  int population_size = 1024;
  int tournament_size = 20;
  double mutation_prob = 0.01;   // point mutation
  double crossover_prob = 0.9;   // subtree crossover; the rest is reproduction
  double point_replace_prob = 0.05;  // per node, inside a point mutation
  datagen::Interval constant_range{-4 * std::numbers::pi, 4 * std::numbers::pi};
  int generations = 20;
  std::vector<GpOp> function_set = default_function_set();
  int max_depth = 17;
  int init_depth_min = 2;
  int init_depth_max = 6;
  double parsimony_coefficient = 0.001;  // selection only; reported fitness is raw
  FitnessMetric metric = FitnessMetric::MAE;
  int threads = 1;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig.
  void validate() const;
};

struct Individual {
  Program program;
  double fitness = std::numeric_limits<double>::infinity();
  double penalized = std::numeric_limits<double>::infinity();
};

struct GenerationStats {
  int generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
};

struct EvolveResult {
  Individual best;  // best ever by raw fitness
  std::vector<GenerationStats> trace;
};

/// Ramped half-and-half over depths init_depth_min..init_depth_max; terminals
/// are x1..x<n_variables> and constants ~ U(constant_range). Fitness unset.
std::vector<Individual> init_population(const GpConfig& cfg, int n_variables, Rng& rng);

/// Ramped building block: full trees put every leaf at `max_depth`.
Program random_program(const GpConfig& cfg, int n_variables, int max_depth, bool full, Rng& rng);

/// Subtree crossover; a child deeper than max_depth is redrawn a few times,
/// then the parent is returned unchanged.
Program crossover(const Program& parent, const Program& donor, int max_depth, Rng& rng);

/// Each node is replaced with point_replace_prob by a random node of the same arity.
Program point_mutation(const Program& parent, const GpConfig& cfg, int n_variables, Rng& rng);

/// Mean absolute (or squared) error; finite for any finite data.
double fitness(const Program& p, const expr::Columns& x, std::span<const double> y, FitnessMetric metric);

/// Index of the tournament winner: tournament_size distinct entrants, lowest
/// penalized fitness wins (ties to the lower index).
std::size_t tournament(std::span<const Individual> population, int k, Rng& rng);

/// Generation 0 is the initial population. `x` columns past n_variables are ignored.
EvolveResult evolve(const GpConfig& cfg, const expr::Columns& x, int n_variables, std::span<const double> y,
                    Rng& rng);

/// Header generation,best_fitness,mean_fitness.
void write_trace_csv(const std::vector<GenerationStats>& trace, std::ostream& out);

/// Adapter for benchmark runs: the number of variables is the index of the
/// last column that is not all zeros; evolution is seeded from cfg.seed.
std::function<expr::Expression(const expr::Columns&, std::span<const double>)> as_regressor(GpConfig cfg);

}  // namespace nsr::gp
