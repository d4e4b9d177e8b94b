#include "modelseg/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>

#include <json.hpp>

#include "modelseg/errors.hpp"
#include "modelseg/imgproc.hpp"

namespace modelseg {

void EvolutionConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ArgumentError("evolve: dt must be > 0");
  if (max_iters <= 0) throw ArgumentError("evolve: max_iters must be > 0");
  if (check_interval <= 0) throw ArgumentError("evolve: check_interval must be > 0");
  if (!(stop_tol >= 0.0)) throw ArgumentError("evolve: stop_tol must be >= 0");
  if (!(epsilon > 0.0)) throw ArgumentError("evolve: epsilon must be > 0");
  if (!(regularization >= 0.0)) {
    throw ArgumentError("evolve: regularization must be >= 0");
  }
  if (!std::isfinite(nu)) throw ArgumentError("evolve: nu must be finite");
}

EdgeMap edge_function(const ImageGrid& image, double sigma, double p) {
  if (!(p >= 1.0)) throw ArgumentError("edge_function: p must be >= 1");
  if (!(sigma >= 0.0)) throw ArgumentError("edge_function: sigma must be >= 0");
  const ImageGrid smooth = gaussian_blur(luminance(image), sigma);
  const ImageGradients grad = gradients(smooth);
  EdgeMap edge;
  edge.sigma = sigma;
  edge.p = p;
  edge.g = ImageGrid(smooth.width(), smooth.height(), 1);
  auto out = edge.g.data();
  auto du = grad.du.data();
  auto dv = grad.dv.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = std::hypot(du[i], dv[i]);
    out[i] = std::max(1.0 / (1.0 + std::pow(m, p)),
                      std::numeric_limits<double>::min());
  }
  return edge;
}

LevelSetField init_phi(const BinaryGrid& inside, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw ArgumentError("init_phi: rho must be positive");
  }
  const std::size_t n = inside.count();
  if (n == 0) throw ArgumentError("init_phi: region is empty");
  if (n == inside.size()) {
    throw ArgumentError("init_phi: region covers the whole grid, no contour exists");
  }
  LevelSetField field;
  field.rho = rho;
  field.phi = ImageGrid(inside.width(), inside.height(), 1, rho);
  for (int v = 0; v < inside.height(); ++v) {
    for (int u = 0; u < inside.width(); ++u) {
      if (!inside.at(u, v)) continue;
      const bool edge = !inside.at_or(u - 1, v, true) || !inside.at_or(u + 1, v, true) ||
                        !inside.at_or(u, v - 1, true) || !inside.at_or(u, v + 1, true);
      field.phi.at(u, v) = edge ? 0.0 : -rho;
    }
  }
  return field;
}

namespace {

struct Stencil {
  int w;
  int h;
  const double* phi;

  double at(int u, int v) const {
    u = std::clamp(u, 0, w - 1);
    v = std::clamp(v, 0, h - 1);
    return phi[static_cast<std::size_t>(v) * w + u];
  }
};

struct FaceGradient {
  double normal;  // phi difference across the face
  double norm;    // |grad phi| at the face, epsilon-regularised
};

// Gradient on the face between (u, v) and (u + du, v + dv). The tangential
// derivative is the mean of the central differences on both sides of the face.
FaceGradient face_gradient(const Stencil& s, int u, int v, int du, int dv, double eps) {
  const double a = s.at(u, v);
  const double b = s.at(u + du, v + dv);
  const double normal = b - a;
  const int tu = dv;
  const int tv = du;
  const double tangential =
      0.25 * (s.at(u + tu, v + tv) - s.at(u - tu, v - tv) +
              s.at(u + du + tu, v + dv + tv) - s.at(u + du - tu, v + dv - tv));
  return {normal, std::sqrt(normal * normal + tangential * tangential + eps * eps)};
}

// Diffusion rate p'(s) / s of the double-well potential
// p(s) = (1 - cos(2 pi s)) / (2 pi)^2 for s <= 1 and (s - 1)^2 / 2 beyond.
// It equals 1 - 1/s for s >= 1 and stays bounded as s -> 0.
double double_well_rate(double s) {
  if (s >= 1.0) return 1.0 - 1.0 / s;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (s < 1e-6) return 1.0;
  return std::sin(two_pi * s) / (two_pi * s);
}

double harmonic(double a, double b) {
  const double sum = a + b;
  return sum > 0.0 ? 2.0 * a * b / sum : 0.0;
}

}  // namespace

LevelSetField evolve(const LevelSetField& field, const EdgeMap& edge,
                     const EvolutionConfig& config, const EvolutionObserver& observer,
                     EvolutionReport* report) {
  config.validate();
  if (field.phi.channels() != 1 || edge.g.channels() != 1 ||
      field.phi.width() != edge.g.width() || field.phi.height() != edge.g.height()) {
    throw ArgumentError("evolve: phi and g must be 1-channel grids of equal size");
  }
  if (field.phi.empty()) throw ArgumentError("evolve: empty field");
  const int w = field.phi.width();
  const int h = field.phi.height();
  const std::size_t n = field.phi.size();
  const double eps = config.epsilon;
  const double mu = config.regularization;
  const double* g = edge.g.data().data();

  LevelSetField current = field;
  ImageGrid next(w, h, 1);
  // Face fluxes: fx[v * w + u] is the face between (u, v) and (u + 1, v).
  std::vector<double> fx(n, 0.0), fy(n, 0.0), rx(n, 0.0), ry(n, 0.0);
  BinaryGrid last_mask = zero_level_mask(current);
  EvolutionReport local;

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    const Stencil s{w, h, current.phi.data().data()};
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const std::size_t p = static_cast<std::size_t>(v) * w + u;
        if (u + 1 < w) {
          const FaceGradient f = face_gradient(s, u, v, 1, 0, eps);
          fx[p] = harmonic(g[p], g[p + 1]) * f.normal / f.norm;
          rx[p] = double_well_rate(f.norm) * f.normal;
        }
        if (v + 1 < h) {
          const FaceGradient f = face_gradient(s, u, v, 0, 1, eps);
          fy[p] = harmonic(g[p], g[p + w]) * f.normal / f.norm;
          ry[p] = double_well_rate(f.norm) * f.normal;
        }
      }
    }
    double max_step = 0.0;
    double* out = next.data().data();
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const std::size_t p = static_cast<std::size_t>(v) * w + u;
        const double c = s.at(u, v);
        const double div = (u + 1 < w ? fx[p] : 0.0) - (u > 0 ? fx[p - 1] : 0.0) +
                           (v + 1 < h ? fy[p] : 0.0) - (v > 0 ? fy[p - w] : 0.0);
        const double cu = 0.5 * (s.at(u + 1, v) - s.at(u - 1, v));
        const double cv = 0.5 * (s.at(u, v + 1) - s.at(u, v - 1));
        const double grad_c = std::sqrt(cu * cu + cv * cv + eps * eps);

        // Osher-Sethian upwinding of |grad phi| for phi_t + F |grad phi| = 0.
        const double speed = -config.nu * g[p];
        const double dmu = c - s.at(u - 1, v);
        const double dpu = s.at(u + 1, v) - c;
        const double dmv = c - s.at(u, v - 1);
        const double dpv = s.at(u, v + 1) - c;
        double grad_up = 0.0;
        if (speed > 0.0) {
          grad_up = std::sqrt(std::pow(std::max(dmu, 0.0), 2) + std::pow(std::min(dpu, 0.0), 2) +
                              std::pow(std::max(dmv, 0.0), 2) + std::pow(std::min(dpv, 0.0), 2));
        } else if (speed < 0.0) {
          grad_up = std::sqrt(std::pow(std::min(dmu, 0.0), 2) + std::pow(std::max(dpu, 0.0), 2) +
                              std::pow(std::min(dmv, 0.0), 2) + std::pow(std::max(dpv, 0.0), 2));
        }
        double rate = grad_c * div - speed * grad_up;
        if (mu > 0.0) {
          const double reg = (u + 1 < w ? rx[p] : 0.0) - (u > 0 ? rx[p - 1] : 0.0) +
                             (v + 1 < h ? ry[p] : 0.0) - (v > 0 ? ry[p - w] : 0.0);
          rate += mu * g[p] * reg;
        }
        const double step = config.dt * rate;
        out[p] = c + step;
        if (!std::isfinite(out[p])) {
          throw NumericalInstabilityError(
              "evolve: phi became non-finite (time step too large?)", iter);
        }
        max_step = std::max(max_step, std::abs(step));
      }
    }
    std::swap(current.phi, next);
    local.iterations = iter;
    local.max_step = std::max(local.max_step, max_step);

    if (iter % config.check_interval == 0) {
      if (observer) observer(iter, current);
      BinaryGrid mask = zero_level_mask(current);
      std::size_t changed = 0;
      const auto a = mask.bits();
      const auto b = last_mask.bits();
      for (std::size_t i = 0; i < a.size(); ++i) changed += a[i] != b[i];
      last_mask = std::move(mask);
      if (static_cast<double>(changed) < config.stop_tol * static_cast<double>(n)) {
        local.converged = true;
        break;
      }
    }
  }
  if (report) *report = local;
  return current;
}

BinaryGrid zero_level_mask(const LevelSetField& field) {
  BinaryGrid mask(field.phi.width(), field.phi.height());
  for (int v = 0; v < field.phi.height(); ++v) {
    for (int u = 0; u < field.phi.width(); ++u) mask.set(u, v, field.phi.at(u, v) < 0.0);
  }
  return mask;
}

std::vector<Polyline> zero_level_contours(const LevelSetField& field) {
  const int w = field.phi.width() + 2;
  const int h = field.phi.height() + 2;
  std::vector<double> padded(static_cast<std::size_t>(w) * h, 1.0);
  for (int v = 0; v < field.phi.height(); ++v) {
    for (int u = 0; u < field.phi.width(); ++u) {
      padded[static_cast<std::size_t>(v + 1) * w + (u + 1)] = field.phi.at(u, v);
    }
  }
  auto value = [&](int i, int j) { return padded[static_cast<std::size_t>(j) * w + i]; };
  auto inside = [&](int i, int j) { return value(i, j) < 0.0; };
  // Edge keys: 2 * node for the edge to the right, 2 * node + 1 for the edge
  // below, where node = j * w + i.
  auto h_key = [&](int i, int j) { return 2 * (static_cast<std::int64_t>(j) * w + i); };
  auto v_key = [&](int i, int j) { return 2 * (static_cast<std::int64_t>(j) * w + i) + 1; };

  std::map<std::int64_t, std::vector<std::int64_t>> links;
  auto link = [&](std::int64_t a, std::int64_t b) {
    links[a].push_back(b);
    links[b].push_back(a);
  };
  for (int j = 0; j + 1 < h; ++j) {
    for (int i = 0; i + 1 < w; ++i) {
      const bool tl = inside(i, j);
      const bool tr = inside(i + 1, j);
      const bool br = inside(i + 1, j + 1);
      const bool bl = inside(i, j + 1);
      const int count = tl + tr + br + bl;
      if (count == 0 || count == 4) continue;
      const std::int64_t top = h_key(i, j);
      const std::int64_t bottom = h_key(i, j + 1);
      const std::int64_t left = v_key(i, j);
      const std::int64_t right = v_key(i + 1, j);
      if (tl == br && tr == bl && tl != tr) {
        const double center =
            0.25 * (value(i, j) + value(i + 1, j) + value(i + 1, j + 1) + value(i, j + 1));
        if (tl == (center < 0.0)) {
          link(top, right);
          link(bottom, left);
        } else {
          link(left, top);
          link(right, bottom);
        }
        continue;
      }
      std::vector<std::int64_t> crossed;
      if (tl != tr) crossed.push_back(top);
      if (tr != br) crossed.push_back(right);
      if (br != bl) crossed.push_back(bottom);
      if (bl != tl) crossed.push_back(left);
      link(crossed[0], crossed[1]);
    }
  }

  auto position = [&](std::int64_t key) {
    const std::int64_t node = key / 2;
    const int i = static_cast<int>(node % w);
    const int j = static_cast<int>(node / w);
    const bool horizontal = key % 2 == 0;
    const int i2 = horizontal ? i + 1 : i;
    const int j2 = horizontal ? j : j + 1;
    const double a = value(i, j);
    const double b = value(i2, j2);
    const double t = a / (a - b);
    return Eigen::Vector2d(i - 0.5 + t * (i2 - i), j - 0.5 + t * (j2 - j));
  };

  std::vector<Polyline> contours;
  std::map<std::int64_t, bool> visited;
  for (const auto& [start, _] : links) {
    if (visited[start]) continue;
    Polyline line;
    std::int64_t previous = -1;
    std::int64_t node = start;
    while (!visited[node]) {
      visited[node] = true;
      line.push_back(position(node));
      const auto& next = links[node];
      std::int64_t step = next[0] != previous ? next[0] : next[1];
      if (next.size() > 1 && next[0] == next[1]) step = next[0];
      previous = node;
      node = step;
    }
    double area = 0.0;
    for (std::size_t k = 0; k < line.size(); ++k) {
      const auto& p = line[k];
      const auto& q = line[(k + 1) % line.size()];
      area += p.x() * q.y() - q.x() * p.y();
    }
    if (area < 0.0) std::reverse(line.begin() + 1, line.end());
    contours.push_back(std::move(line));
  }
  return contours;
}

double closed_length(const Polyline& line) {
  double length = 0.0;
  for (std::size_t k = 0; k < line.size(); ++k) {
    length += (line[(k + 1) % line.size()] - line[k]).norm();
  }
  return length;
}

std::string contours_to_json(const std::string& part,
                             const std::vector<Polyline>& contours) {
  nlohmann::ordered_json j;
  j["part"] = part;
  j["contours"] = nlohmann::ordered_json::array();
  for (const auto& line : contours) {
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (const auto& p : line) points.push_back({p.x(), p.y()});
    j["contours"].push_back(std::move(points));
  }
  return j.dump() + "\n";
}

}  // namespace modelseg
