#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "nsr/inference/beam.hpp"

namespace nsr::inference {

/// Mean squared error of `e` (constants already bound) on the points; NaN
/// when any prediction is non-finite.
double mse(const expr::Expression& e, const expr::Columns& x, std::span<const double> y);

/// Fits constants of one candidate. A skeleton that already carries
/// placeholders is fitted as is; one without placeholders is first scored
/// directly and, unless that is exact, fitted after place_constants. Each
/// restart starts from U(restart_init_range), redrawn up to 32 times while the
/// objective is not finite there. Throws FitFailed.
Candidate fit_candidate(Candidate cand, const expr::Columns& x, std::span<const double> y,
                        const InferenceConfig& config, Rng& rng);

/// Minimal score, then higher log-likelihood, then shorter skeleton. Only
/// candidates with a finite score take part; throws NoValidCandidate.
Candidate select_best(std::span<const Candidate> cands);

struct RegressReport {
  std::vector<Candidate> candidates;  // fitted ones, ranked by selection order
  std::size_t dropped = 0;            // fit failures and NaN fits
  std::size_t invalid_beams = 0;
  double encode_millis = 0.0;
  double beam_millis = 0.0;
  double fit_millis = 0.0;
};

struct RegressResult {
  expr::Expression expression;
  Candidate best;
  RegressReport report;
};

/// `x` holds one column per input variable (at most 3, all of y's length).
/// Throws TooManyVariables, NoValidCandidate, InvalidConfig.
RegressResult regress(const model::Network<float>& net, const std::vector<std::vector<double>>& x,
                      std::span<const double> y, const InferenceConfig& config);

/// Same, starting from a given candidate list instead of the model (oracle
/// skeletons for constant-fitting studies).
RegressResult regress_candidates(std::vector<Candidate> candidates, const expr::Columns& x, std::span<const double> y,
                                 const InferenceConfig& config);

/// Columns for up to three variables; absent ones are zero.
expr::Columns to_columns(const std::vector<std::vector<double>>& x, std::size_t n);

/// One JSON object per candidate: rank, infix, skeleton, prefix,
/// log_likelihood, mse, score, constants, fit_millis.
void write_report(const RegressReport& report, std::ostream& out);

}  // namespace nsr::inference
