#pragma once

#include <functional>
#include <span>
#include <vector>

namespace modelseg {

using Objective = std::function<double(std::span<const double>)>;

// Called whenever a new best value is found: (evaluations so far, value, x).
using ImprovementCallback =
    std::function<void(int, double, std::span<const double>)>;

struct SimplexConfig {
  // Initial simplex is x0 plus step[i] * e_i for each dimension.
  std::vector<double> initial_step;
  // A run stops once max - min over the simplex values drops below this.
  double tolerance = 1e-6;
  // Evaluation budget per run (each restart gets a fresh budget).
  int max_evaluations = 1400;
  // After convergence, rebuild the simplex around the incumbent this many
  // times. Restart r (1-based) uses (r + 1) * initial_step so a simplex that
  // stalled on a plateau sees farther on the next attempt.
  int restarts = 2;
  // Used by coarse_to_fine_register at its first (coarsest) level only. Each
  // entry is another initial step vector; the level runs once from the start
  // with initial_step and once with each of these, keeping the lowest result.
  // nelder_mead ignores it.
  std::vector<std::vector<double>> coarse_alternative_steps;

  // Throws ArgumentError if any step vector has the wrong size or a
  // non-positive entry, or tolerance <= 0.
  void validate(std::size_t dimension) const;
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  int restarts_used = 0;
};

// Nelder-Mead with reflection 1, expansion 2, contraction 0.5 and shrink 0.5.
// Non-finite objective values are treated as +infinity. The returned value is
// never worse than objective(x0). Deterministic.
SimplexResult nelder_mead(const Objective& objective, std::span<const double> x0,
                          const SimplexConfig& config,
                          const ImprovementCallback& on_improvement = {});

}  // namespace modelseg
