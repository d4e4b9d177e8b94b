#include "modelseg/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <utility>
#include <vector>

#include "modelseg/errors.hpp"

namespace modelseg {

namespace {

void require_min_size(const ImageGrid& image, const char* what) {
  if (image.width() < 2 || image.height() < 2) {
    throw ArgumentError(std::string(what) + ": image must be at least 2x2");
  }
}

// Stand-in for "no set pixel"; large enough that d^2 of any real offset
// inside a raster stays far below it.
constexpr double kFar = 1e20;

// 1D squared Euclidean distance transform (Felzenszwalb & Huttenlocher).
void distance_transform_1d(const std::vector<double>& f, std::vector<double>& d,
                           std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  auto intersect = [&](int q, int p) {
    return ((f[q] + static_cast<double>(q) * q) -
            (f[p] + static_cast<double>(p) * p)) /
           (2.0 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

// Exact squared distance from every pixel to the nearest set pixel; values
// >= kFar mean the mask is empty.
std::vector<double> squared_distance_to_set(const BinaryGrid& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<double> dist(static_cast<std::size_t>(w) * h, kFar);
  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);

  f.resize(h);
  d.resize(h);
  for (int u = 0; u < w; ++u) {
    for (int y = 0; y < h; ++y) f[y] = mask.at(u, y) ? 0.0 : kFar;
    distance_transform_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) dist[static_cast<std::size_t>(y) * w + u] = d[y];
  }
  f.resize(w);
  d.resize(w);
  for (int y = 0; y < h; ++y) {
    for (int u = 0; u < w; ++u) f[u] = dist[static_cast<std::size_t>(y) * w + u];
    distance_transform_1d(f, d, v, z);
    for (int u = 0; u < w; ++u) dist[static_cast<std::size_t>(y) * w + u] = d[u];
  }
  return dist;
}

}  // namespace

ImageGradients gradients(const ImageGrid& image) {
  require_min_size(image, "gradients");
  const int w = image.width();
  const int h = image.height();
  const int d = image.channels();
  ImageGradients out{ImageGrid(w, h, d), ImageGrid(w, h, d)};
  for (int v = 0; v < h; ++v) {
    const int vm = std::max(v - 1, 0);
    const int vp = std::min(v + 1, h - 1);
    for (int u = 0; u < w; ++u) {
      const int um = std::max(u - 1, 0);
      const int up = std::min(u + 1, w - 1);
      for (int c = 0; c < d; ++c) {
        out.du.at(u, v, c) = 0.5 * (image.at(up, v, c) - image.at(um, v, c));
        out.dv.at(u, v, c) = 0.5 * (image.at(u, vp, c) - image.at(u, vm, c));
      }
    }
  }
  return out;
}

ImageGrid gradient_magnitude(const ImageGrid& image, int k) {
  ImageGrid out;
  gradient_magnitude_into(image, k, out);
  return out;
}

void gradient_magnitude_into(const ImageGrid& image, int k, ImageGrid& out) {
  if (k != 1 && k != 2) {
    throw ArgumentError("gradient_magnitude: k must be 1 or 2");
  }
  require_min_size(image, "gradient_magnitude");
  const int w = image.width();
  const int h = image.height();
  const int d = image.channels();
  out.assign(w, h, 1, 0.0);
  const auto src = image.data();
  auto dst = out.data();
  const std::size_t stride = static_cast<std::size_t>(w) * d;
  for (int v = 0; v < h; ++v) {
    const double* row = src.data() + v * stride;
    const double* above = src.data() + std::max(v - 1, 0) * stride;
    const double* below = src.data() + std::min(v + 1, h - 1) * stride;
    for (int u = 0; u < w; ++u) {
      const std::size_t um = static_cast<std::size_t>(std::max(u - 1, 0)) * d;
      const std::size_t up = static_cast<std::size_t>(std::min(u + 1, w - 1)) * d;
      const std::size_t uc = static_cast<std::size_t>(u) * d;
      double sum = 0.0;
      for (int c = 0; c < d; ++c) {
        const double gu = 0.5 * (row[up + c] - row[um + c]);
        const double gv = 0.5 * (below[uc + c] - above[uc + c]);
        sum += k == 1 ? std::abs(gu) + std::abs(gv) : gu * gu + gv * gv;
      }
      dst[static_cast<std::size_t>(v) * w + u] = sum;
    }
  }
}

ImageGrid pyramid_reduce(const ImageGrid& image) {
  ImageGrid out;
  ImageGrid scratch;
  pyramid_reduce_into(image, out, scratch);
  return out;
}

void pyramid_reduce_into(const ImageGrid& image, ImageGrid& out, ImageGrid& scratch) {
  const int w = image.width();
  const int h = image.height();
  const int d = image.channels();
  const int ow = w / 2;
  const int oh = h / 2;
  if (ow < 2 || oh < 2) {
    throw ArgumentError("pyramid_reduce: image too small to reduce");
  }
  static constexpr double kKernel[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16,
                                        1.0 / 16};
  // Horizontal pass evaluated at even columns only.
  ImageGrid& tmp = scratch;
  tmp.assign(ow, h, d, 0.0);
  for (int v = 0; v < h; ++v) {
    for (int i = 0; i < ow; ++i) {
      const int u = 2 * i;
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int t = -2; t <= 2; ++t) {
          const int uu = std::clamp(u + t, 0, w - 1);
          acc += kKernel[t + 2] * image.at(uu, v, c);
        }
        tmp.at(i, v, c) = acc;
      }
    }
  }
  out.assign(ow, oh, d, 0.0);
  for (int j = 0; j < oh; ++j) {
    const int v = 2 * j;
    for (int i = 0; i < ow; ++i) {
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int t = -2; t <= 2; ++t) {
          const int vv = std::clamp(v + t, 0, h - 1);
          acc += kKernel[t + 2] * tmp.at(i, vv, c);
        }
        out.at(i, j, c) = acc;
      }
    }
  }
}

ImageGrid gaussian_pyramid_level(const ImageGrid& image, int levels) {
  if (levels < 0) throw ArgumentError("gaussian_pyramid_level: negative level");
  int w = image.width();
  int h = image.height();
  for (int n = 0; n < levels; ++n) {
    w /= 2;
    h /= 2;
  }
  if (w < 2 || h < 2) {
    throw ArgumentError("gaussian_pyramid_level: image too small for level " +
                        std::to_string(levels));
  }
  ImageGrid out = image;
  for (int n = 0; n < levels; ++n) out = pyramid_reduce(out);
  return out;
}

ImageGrid gaussian_blur(const ImageGrid& image, double sigma) {
  if (sigma < 0.0) throw ArgumentError("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    kernel[t + radius] = std::exp(-0.5 * t * t / (sigma * sigma));
    total += kernel[t + radius];
  }
  for (auto& k : kernel) k /= total;

  const int w = image.width();
  const int h = image.height();
  const int d = image.channels();
  ImageGrid tmp(w, h, d);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          acc += kernel[t + radius] * image.at(std::clamp(u + t, 0, w - 1), v, c);
        }
        tmp.at(u, v, c) = acc;
      }
    }
  }
  ImageGrid out(w, h, d);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          acc += kernel[t + radius] * tmp.at(u, std::clamp(v + t, 0, h - 1), c);
        }
        out.at(u, v, c) = acc;
      }
    }
  }
  return out;
}

double pearson(const ImageGrid& a, const ImageGrid& b) {
  if (!a.same_shape(b)) throw ArgumentError("pearson: shape mismatch");
  const auto x = a.data();
  const auto y = b.data();
  const std::size_t n = x.size();
  if (n == 0) throw ArgumentError("pearson: empty input");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw DegenerateCorrelationError("pearson: zero variance operand");
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

ImageGrid luminance(const ImageGrid& image) {
  if (image.channels() == 1) return image;
  const int w = image.width();
  const int h = image.height();
  const int d = image.channels();
  ImageGrid out(w, h, 1);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double y = 0.0;
      if (d == 3) {
        y = 0.299 * image.at(u, v, 0) + 0.587 * image.at(u, v, 1) +
            0.114 * image.at(u, v, 2);
      } else {
        for (int c = 0; c < d; ++c) y += image.at(u, v, c);
        y /= d;
      }
      out.at(u, v) = y;
    }
  }
  return out;
}

ImageGrid apply_mask(const ImageGrid& image, const BinaryGrid& mask) {
  if (image.width() != mask.width() || image.height() != mask.height()) {
    throw ArgumentError("apply_mask: shape mismatch");
  }
  ImageGrid out = image;
  for (int v = 0; v < image.height(); ++v) {
    for (int u = 0; u < image.width(); ++u) {
      if (mask.at(u, v)) continue;
      for (int c = 0; c < image.channels(); ++c) out.at(u, v, c) = 0.0;
    }
  }
  return out;
}

BinaryGrid dilate(const BinaryGrid& mask, double radius, bool outside) {
  if (radius < 0.0) throw ArgumentError("dilate: radius must be >= 0");
  const int w = mask.width();
  const int h = mask.height();
  if (radius == 0.0) return mask;
  const auto dist = squared_distance_to_set(mask);
  const double r2 = radius * radius;
  BinaryGrid out(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double d2 = dist[static_cast<std::size_t>(v) * w + u];
      if (outside) {
        const double du = std::min(u + 1, w - u);
        const double dv = std::min(v + 1, h - v);
        d2 = std::min({d2, du * du, dv * dv});
      }
      out.set(u, v, d2 <= r2);
    }
  }
  return out;
}

BinaryGrid erode(const BinaryGrid& mask, double radius, bool outside) {
  if (radius < 0.0) throw ArgumentError("erode: radius must be >= 0");
  if (radius == 0.0) return mask;
  return ~dilate(~mask, radius, !outside);
}

BinaryGrid fill_outline(const BinaryGrid& outline) {
  const int w = outline.width();
  const int h = outline.height();
  BinaryGrid reached(w, h);
  std::deque<std::pair<int, int>> queue;
  auto seed = [&](int u, int v) {
    if (!outline.at(u, v) && !reached.at(u, v)) {
      reached.set(u, v, true);
      queue.emplace_back(u, v);
    }
  };
  for (int u = 0; u < w; ++u) {
    seed(u, 0);
    seed(u, h - 1);
  }
  for (int v = 0; v < h; ++v) {
    seed(0, v);
    seed(w - 1, v);
  }
  while (!queue.empty()) {
    const auto [u, v] = queue.front();
    queue.pop_front();
    if (u > 0) seed(u - 1, v);
    if (u + 1 < w) seed(u + 1, v);
    if (v > 0) seed(u, v - 1);
    if (v + 1 < h) seed(u, v + 1);
  }
  return ~reached;
}

BinaryGrid boundary_pixels(const BinaryGrid& mask) {
  const int w = mask.width();
  const int h = mask.height();
  BinaryGrid out(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!mask.at(u, v)) continue;
      const bool edge = !mask.at_or(u - 1, v, false) ||
                        !mask.at_or(u + 1, v, false) ||
                        !mask.at_or(u, v - 1, false) ||
                        !mask.at_or(u, v + 1, false);
      out.set(u, v, edge);
    }
  }
  return out;
}

}  // namespace modelseg
