#include "modelseg/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "modelseg/errors.hpp"

namespace modelseg {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;

class Runner {
 public:
  Runner(const Objective& objective, const ImprovementCallback& callback,
         std::size_t dim)
      : objective_(objective), callback_(callback), dim_(dim) {}

  double evaluate(const std::vector<double>& x) {
    double value = objective_(std::span<const double>(x));
    if (!std::isfinite(value)) value = std::numeric_limits<double>::infinity();
    ++evaluations_;
    if (value < best_value_ || best_x_.empty()) {
      best_value_ = value;
      best_x_ = x;
      if (callback_) callback_(evaluations_, value, best_x_);
    }
    return value;
  }

  // One Nelder-Mead run from `start` (value already known).
  void run(const std::vector<double>& start, double start_value,
           const std::vector<double>& step, const SimplexConfig& config) {
    const std::size_t n = dim_;
    std::vector<std::vector<double>> vertex(n + 1, start);
    std::vector<double> value(n + 1, start_value);
    const int budget_end = evaluations_ + config.max_evaluations;
    for (std::size_t i = 0; i < n; ++i) {
      vertex[i + 1][i] += step[i];
      value[i + 1] = evaluate(vertex[i + 1]);
    }
    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);

    auto along = [&](const std::vector<double>& from, double t,
                     std::vector<double>& out) {
      // out = centroid + t * (from - centroid)
      for (std::size_t k = 0; k < n; ++k) {
        out[k] = centroid[k] + t * (from[k] - centroid[k]);
      }
    };

    while (evaluations_ < budget_end) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return value[a] < value[b];
      });
      const std::size_t best = order.front();
      const std::size_t worst = order.back();
      const std::size_t second = order[n - 1];
      const double spread = value[worst] - value[best];
      if (std::isnan(spread) || spread < config.tolerance) break;

      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& v = vertex[order[i]];
        for (std::size_t k = 0; k < n; ++k) centroid[k] += v[k];
      }
      for (auto& c : centroid) c /= static_cast<double>(n);

      along(vertex[worst], -kReflect, trial);
      const double fr = evaluate(trial);
      if (fr < value[best]) {
        along(vertex[worst], -kReflect * kExpand, trial2);
        const double fe = evaluate(trial2);
        if (fe < fr) {
          vertex[worst] = trial2;
          value[worst] = fe;
        } else {
          vertex[worst] = trial;
          value[worst] = fr;
        }
        continue;
      }
      if (fr < value[second]) {
        vertex[worst] = trial;
        value[worst] = fr;
        continue;
      }
      bool accepted = false;
      if (fr < value[worst]) {
        along(vertex[worst], -kReflect * kContract, trial2);  // outside
        const double fc = evaluate(trial2);
        if (fc <= fr) {
          vertex[worst] = trial2;
          value[worst] = fc;
          accepted = true;
        }
      } else {
        along(vertex[worst], kContract, trial2);  // inside
        const double fc = evaluate(trial2);
        if (fc < value[worst]) {
          vertex[worst] = trial2;
          value[worst] = fc;
          accepted = true;
        }
      }
      if (accepted) continue;
      const auto& anchor = vertex[best];
      for (std::size_t i = 0; i <= n; ++i) {
        if (i == best) continue;
        for (std::size_t k = 0; k < n; ++k) {
          vertex[i][k] = anchor[k] + kShrink * (vertex[i][k] - anchor[k]);
        }
        value[i] = evaluate(vertex[i]);
      }
    }
  }

  int evaluations() const { return evaluations_; }
  const std::vector<double>& best_x() const { return best_x_; }
  double best_value() const { return best_value_; }

 private:
  const Objective& objective_;
  const ImprovementCallback& callback_;
  std::size_t dim_;
  int evaluations_ = 0;
  double best_value_ = std::numeric_limits<double>::infinity();
  std::vector<double> best_x_;
};

}  // namespace

void SimplexConfig::validate(std::size_t dimension) const {
  if (initial_step.size() != dimension) {
    throw ArgumentError("simplex: need one initial step per dimension (" +
                        std::to_string(dimension) + ")");
  }
  for (double s : initial_step) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw ArgumentError("simplex: initial steps must be positive");
    }
  }
  if (!(tolerance > 0.0)) throw ArgumentError("simplex: tolerance must be positive");
  if (max_evaluations < 1) throw ArgumentError("simplex: max_evaluations must be >= 1");
  if (restarts < 0) throw ArgumentError("simplex: restarts must be >= 0");
  for (const auto& steps : coarse_alternative_steps) {
    SimplexConfig alternative = *this;
    alternative.initial_step = steps;
    alternative.coarse_alternative_steps.clear();
    alternative.validate(dimension);
  }
}

SimplexResult nelder_mead(const Objective& objective, std::span<const double> x0,
                          const SimplexConfig& config,
                          const ImprovementCallback& on_improvement) {
  if (x0.empty()) throw ArgumentError("simplex: empty starting point");
  config.validate(x0.size());
  Runner runner(objective, on_improvement, x0.size());
  const std::vector<double> start(x0.begin(), x0.end());
  const double start_value = runner.evaluate(start);

  SimplexResult result;
  runner.run(start, start_value, config.initial_step, config);
  for (int r = 1; r <= config.restarts; ++r) {
    std::vector<double> step = config.initial_step;
    for (auto& s : step) s *= static_cast<double>(r + 1);
    runner.run(runner.best_x(), runner.best_value(), step, config);
    result.restarts_used = r;
  }
  result.x = runner.best_x();
  result.value = runner.best_value();
  result.evaluations = runner.evaluations();
  return result;
}

}  // namespace modelseg
