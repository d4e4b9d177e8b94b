#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "modelseg/image.hpp"

namespace modelseg {

// Defaults for the edge map. A narrow kernel and p = 1 keep the low-g band
// around strong edges thin enough for the front to reach the edge itself.
inline constexpr double kDefaultEdgeSigma = 0.5;
inline constexpr double kDefaultEdgeExponent = 1.0;

// g = 1 / (1 + |grad(G_sigma * I)|^p), one channel, values in (0, 1].
struct EdgeMap {
  ImageGrid g;
  double sigma = kDefaultEdgeSigma;
  double p = kDefaultEdgeExponent;
};

// Level-set function, negative inside the curve.
struct LevelSetField {
  ImageGrid phi;
  double rho = 2.0;
};

struct EvolutionConfig {
  // Balloon coefficient: positive shrinks, negative expands. Near an edge the
  // front settles about |nu| sigma^2 / p pixels outside it, so the balloon is
  // kept weak.
  double nu = -0.4;
  double dt = 0.1;
  int max_iters = 1000;
  // The zero-level mask is compared every check_interval iterations; the run
  // stops once the changed fraction of pixels drops below stop_tol.
  int check_interval = 25;
  double stop_tol = 0.001;
  // Regularises |grad phi| in the normalisations.
  double epsilon = 1e-8;
  // Weight of the distance-regularising term mu g div(d(|grad phi|) grad phi)
  // with the double-well rate d(s) (equal to 1 - 1/s for s >= 1, so the term
  // is lap(phi) - div(grad phi / |grad phi|) wherever the slope is at least
  // one). 0 evaluates the plain geodesic flow.
  double regularization = 0.04;

  // Throws ArgumentError for dt <= 0, max_iters <= 0, epsilon <= 0, ...
  void validate() const;
};

// Edge map of the luminance of `image` (values used as given, no rescaling).
// Throws ArgumentError for p < 1 or sigma < 0.
EdgeMap edge_function(const ImageGrid& image, double sigma = kDefaultEdgeSigma,
                      double p = kDefaultEdgeExponent);

// phi0 = -rho on the region, 0 on region pixels 4-adjacent to a non-region
// pixel, +rho elsewhere. Pixels beyond the grid count as neither. Throws
// ArgumentError if rho <= 0, the region is empty, or it fills the grid.
LevelSetField init_phi(const BinaryGrid& inside, double rho = 2.0);

struct EvolutionReport {
  int iterations = 0;
  // True when the stop tolerance ended the run before max_iters.
  bool converged = false;
  // Largest |phi_new - phi_old| seen in a single iteration.
  double max_step = 0.0;
};

// Called after every check interval with the iteration count and field.
using EvolutionObserver = std::function<void(int, const LevelSetField&)>;

// Explicit time stepping of
//   phi_t = |grad phi| div(g grad phi / |grad phi|) + nu g |grad phi|
// plus the optional regulariser. Throws ArgumentError on shape mismatch and
// NumericalInstabilityError (with the iteration) if phi becomes non-finite.
LevelSetField evolve(const LevelSetField& field, const EdgeMap& edge,
                     const EvolutionConfig& config = {},
                     const EvolutionObserver& observer = {},
                     EvolutionReport* report = nullptr);

// {phi < 0}.
BinaryGrid zero_level_mask(const LevelSetField& field);

using Polyline = std::vector<Eigen::Vector2d>;

// Closed phi = 0 isocontours by marching squares with linear interpolation.
// Pixel (u, v) is sampled at (u + 0.5, v + 0.5); the field is padded with a
// positive border so every contour closes. Each polyline lists its vertices
// once (the closing edge is implicit) with positive shoelace area in (u, v).
std::vector<Polyline> zero_level_contours(const LevelSetField& field);

// Polyline perimeter including the closing edge.
double closed_length(const Polyline& line);

// { "part": name, "contours": [[[u,v],...], ...] }
std::string contours_to_json(const std::string& part,
                             const std::vector<Polyline>& contours);

}  // namespace modelseg
