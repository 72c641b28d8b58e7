#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "cpmm/errors.hpp"
#include "cpmm/linear_map.hpp"

namespace cpmm {

/// Parallel-beam geometry. Angles θ_k = kπ/n_angles; detector bin b is
/// centred at s_b = (b − (n_bins−1)/2)·detector_spacing. The image is
/// centred at the origin with square pixels of side pixel_spacing; pixel
/// (i, j) has centre x = (j − (n−1)/2)h, y = ((m−1)/2 − i)h. Sinograms are
/// stored angle-major (index k·n_bins + b).
struct SinogramGeometry {
  Index n_angles = 0;
  Index n_bins = 0;
  double detector_spacing = 1.0;
  double pixel_spacing = 1.0;

  void validate() const {
    if (n_angles < 1 || n_bins < 1)
      throw Error(ErrorKind::GeometryError, "sinogram geometry needs at least one angle and one bin");
    if (!(detector_spacing > 0.0) || !(pixel_spacing > 0.0) || !std::isfinite(detector_spacing) ||
        !std::isfinite(pixel_spacing))
      throw Error(ErrorKind::GeometryError, "detector and pixel spacing must be positive and finite");
  }

  Index size() const noexcept { return n_angles * n_bins; }

  double angle(Index k) const noexcept {
    constexpr double kPi = 3.14159265358979323846;
    return kPi * static_cast<double>(k) / static_cast<double>(n_angles);
  }

  std::vector<double> angles() const {
    std::vector<double> out(static_cast<std::size_t>(n_angles));
    for (Index k = 0; k < n_angles; ++k) out[static_cast<std::size_t>(k)] = angle(k);
    return out;
  }

  double bin_center(Index b) const noexcept {
    return (static_cast<double>(b) - 0.5 * static_cast<double>(n_bins - 1)) * detector_spacing;
  }
};

/// Sparse ray table: ray r touches pixels[offsets[r] .. offsets[r+1]).
struct RayTable {
  Index n_rays = 0;
  Index n_pixels = 0;
  std::vector<Index> offsets;
  std::vector<Index> pixels;
  std::vector<double> weights;
};

namespace detail {

inline RayTable flatten_rays(std::vector<std::vector<std::pair<Index, double>>>& rays, Index n_pixels) {
  RayTable t;
  t.n_rays = static_cast<Index>(rays.size());
  t.n_pixels = n_pixels;
  t.offsets.reserve(rays.size() + 1);
  t.offsets.push_back(0);
  for (auto& ray : rays) {
    std::sort(ray.begin(), ray.end());
    for (std::size_t k = 0; k < ray.size(); ++k) {
      // Merge repeated pixels.
      if (!t.pixels.empty() && static_cast<Index>(t.pixels.size()) > t.offsets.back() &&
          t.pixels.back() == ray[k].first) {
        t.weights.back() += ray[k].second;
        continue;
      }
      t.pixels.push_back(ray[k].first);
      t.weights.push_back(ray[k].second);
    }
    t.offsets.push_back(static_cast<Index>(t.pixels.size()));
  }
  return t;
}

inline LinearMap table_map(std::shared_ptr<const RayTable> table, std::string name) {
  const Index rows = table->n_rays;
  const Index cols = table->n_pixels;
  auto forward = [table](const Vec& x) -> Vec {
    Vec out(table->n_rays);
    for (Index r = 0; r < table->n_rays; ++r) {
      double acc = 0.0;
      for (Index k = table->offsets[r]; k < table->offsets[r + 1]; ++k)
        acc += table->weights[static_cast<std::size_t>(k)] * x[table->pixels[static_cast<std::size_t>(k)]];
      out[r] = acc;
    }
    return out;
  };
  auto transpose = [table](const Vec& y) -> Vec {
    Vec out = Vec::Zero(table->n_pixels);
    for (Index r = 0; r < table->n_rays; ++r) {
      const double v = y[r];
      for (Index k = table->offsets[r]; k < table->offsets[r + 1]; ++k)
        out[table->pixels[static_cast<std::size_t>(k)]] += table->weights[static_cast<std::size_t>(k)] * v;
    }
    return out;
  };
  return LinearMap(rows, cols, forward, transpose, std::move(name));
}

// CDF of the s-coordinate of a uniform point in a pixel, measured from the
// left end of its support [0, w1 + w2] (w1 ≥ w2 are the projected side
// lengths).
inline double trapezoid_cdf(double t, double w1, double w2) {
  const double total = w1 + w2;
  if (t <= 0.0) return 0.0;
  if (t >= total) return 1.0;
  if (w2 < 1e-12 * w1) return t / total;
  if (t <= w2) return t * t / (2.0 * w1 * w2);
  if (t <= w1) return w2 / (2.0 * w1) + (t - w2) / w1;
  const double r = total - t;
  return 1.0 - r * r / (2.0 * w1 * w2);
}

inline void check_image(Index m, Index n) {
  if (m < 1 || n < 1) throw Error(ErrorKind::GeometryError, "image must have at least one pixel");
}

}  // namespace detail

/// Strip-driven projector: weight of pixel p in ray (θ, b) is
/// area(p ∩ strip_b)/detector_spacing, where strip_b is the set of points
/// whose s-coordinate lies in bin b.
inline RayTable strip_ray_table(const SinogramGeometry& geom, Index m, Index n) {
  geom.validate();
  detail::check_image(m, n);
  const double h = geom.pixel_spacing;
  const double ds = geom.detector_spacing;
  const double area = h * h;
  std::vector<std::vector<std::pair<Index, double>>> rays(static_cast<std::size_t>(geom.size()));
  for (Index k = 0; k < geom.n_angles; ++k) {
    const double th = geom.angle(k);
    const double c = std::cos(th);
    const double s = std::sin(th);
    const double w1 = std::max(std::abs(c), std::abs(s)) * h;
    const double w2 = std::min(std::abs(c), std::abs(s)) * h;
    const double half = 0.5 * (w1 + w2);
    for (Index i = 0; i < m; ++i) {
      const double y = (0.5 * static_cast<double>(m - 1) - static_cast<double>(i)) * h;
      for (Index j = 0; j < n; ++j) {
        const double x = (static_cast<double>(j) - 0.5 * static_cast<double>(n - 1)) * h;
        const double t0 = x * c + y * s;
        const double lo = t0 - half;
        const double hi = t0 + half;
        const Index b_lo = std::max<Index>(0, static_cast<Index>(std::floor(lo / ds + 0.5 * geom.n_bins)));
        const Index b_hi =
            std::min<Index>(geom.n_bins - 1, static_cast<Index>(std::floor(hi / ds + 0.5 * geom.n_bins)));
        for (Index b = b_lo; b <= b_hi; ++b) {
          const double e_lo = geom.bin_center(b) - 0.5 * ds;
          const double e_hi = e_lo + ds;
          const double frac =
              detail::trapezoid_cdf(e_hi - lo, w1, w2) - detail::trapezoid_cdf(e_lo - lo, w1, w2);
          if (frac > 0.0)
            rays[static_cast<std::size_t>(k * geom.n_bins + b)].emplace_back(i * n + j, frac * area / ds);
        }
      }
    }
  }
  return detail::flatten_rays(rays, m * n);
}

/// Line-driven (Joseph) projector: each ray is sampled once per pixel row
/// (or column, whichever the ray crosses more steeply), the image is
/// linearly interpolated between the two neighbouring pixel centres, and the
/// sample is weighted by the path length per row h/|cos θ| (or per column
/// h/|sin θ|). Outside the image the interpolant is zero.
inline RayTable line_ray_table(const SinogramGeometry& geom, Index m, Index n) {
  geom.validate();
  detail::check_image(m, n);
  const double h = geom.pixel_spacing;
  std::vector<std::vector<std::pair<Index, double>>> rays(static_cast<std::size_t>(geom.size()));
  for (Index k = 0; k < geom.n_angles; ++k) {
    const double th = geom.angle(k);
    const double c = std::cos(th);
    const double s = std::sin(th);
    for (Index b = 0; b < geom.n_bins; ++b) {
      const double sb = geom.bin_center(b);
      auto& ray = rays[static_cast<std::size_t>(k * geom.n_bins + b)];
      if (std::abs(c) >= std::abs(s)) {
        // Ray direction (−sin θ, cos θ) is closer to vertical: step rows.
        const double w = h / std::abs(c);
        for (Index i = 0; i < m; ++i) {
          const double y = (0.5 * static_cast<double>(m - 1) - static_cast<double>(i)) * h;
          const double x = (sb - y * s) / c;
          const double jf = x / h + 0.5 * static_cast<double>(n - 1);
          const double j0 = std::floor(jf);
          const double frac = jf - j0;
          const Index ja = static_cast<Index>(j0);
          if (ja >= 0 && ja < n && frac < 1.0) ray.emplace_back(i * n + ja, w * (1.0 - frac));
          if (ja + 1 >= 0 && ja + 1 < n && frac > 0.0) ray.emplace_back(i * n + ja + 1, w * frac);
        }
      } else {
        const double w = h / std::abs(s);
        for (Index j = 0; j < n; ++j) {
          const double x = (static_cast<double>(j) - 0.5 * static_cast<double>(n - 1)) * h;
          const double y = (sb - x * c) / s;
          const double if_ = 0.5 * static_cast<double>(m - 1) - y / h;
          const double i0 = std::floor(if_);
          const double frac = if_ - i0;
          const Index ia = static_cast<Index>(i0);
          if (ia >= 0 && ia < m && frac < 1.0) ray.emplace_back(ia * n + j, w * (1.0 - frac));
          if (ia + 1 >= 0 && ia + 1 < m && frac > 0.0) ray.emplace_back((ia + 1) * n + j, w * frac);
        }
      }
    }
  }
  return detail::flatten_rays(rays, m * n);
}

inline LinearMap radon_strip(const SinogramGeometry& geom, Index m, Index n) {
  return detail::table_map(std::make_shared<const RayTable>(strip_ray_table(geom, m, n)), "radon_strip");
}

inline LinearMap radon_line(const SinogramGeometry& geom, Index m, Index n) {
  return detail::table_map(std::make_shared<const RayTable>(line_ray_table(geom, m, n)), "radon_line");
}

}  // namespace cpmm
