#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cpmm/errors.hpp"
#include "cpmm/linear_map.hpp"
#include "cpmm/prox.hpp"
#include "cpmm/solver.hpp"

namespace cpmm {

/// m×n image stored row-major; row 0 is the top of the image.
struct ImageGrid {
  Index rows = 0;
  Index cols = 0;
  Vec values;

  ImageGrid() = default;
  ImageGrid(Index m, Index n) : rows(m), cols(n), values(Vec::Zero(m * n)) {
    require(m >= 1 && n >= 1, ErrorKind::InvalidParameter, "image dimensions must be positive");
  }
  ImageGrid(Index m, Index n, Vec v) : rows(m), cols(n), values(std::move(v)) {
    require(m >= 1 && n >= 1, ErrorKind::InvalidParameter, "image dimensions must be positive");
    if (values.size() != m * n) throw Error(ErrorKind::DimensionMismatch, "image values have wrong length");
  }

  double& operator()(Index i, Index j) { return values[i * cols + j]; }
  double operator()(Index i, Index j) const { return values[i * cols + j]; }
  FieldShape field_shape() const { return {rows, cols}; }
};

/// Forward differences with a zero far boundary. Output holds the vertical
/// component plane (x_{i+1,j} − x_{i,j}) followed by the horizontal one
/// (x_{i,j+1} − x_{i,j}); the transpose is −div.
inline LinearMap gradient_op(Index m, Index n) {
  require(m >= 2 && n >= 2, ErrorKind::InvalidParameter, "gradient_op: grid must be at least 2x2");
  const Index pixels = m * n;
  auto forward = [m, n, pixels](const Vec& x) -> Vec {
    Vec g = Vec::Zero(2 * pixels);
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) {
        const Index k = i * n + j;
        if (i + 1 < m) g[k] = x[k + n] - x[k];
        if (j + 1 < n) g[pixels + k] = x[k + 1] - x[k];
      }
    }
    return g;
  };
  auto transpose = [m, n, pixels](const Vec& p) -> Vec {
    Vec out = Vec::Zero(pixels);
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < n; ++j) {
        const Index k = i * n + j;
        if (i + 1 < m) {
          out[k + n] += p[k];
          out[k] -= p[k];
        }
        if (j + 1 < n) {
          out[k + 1] += p[pixels + k];
          out[k] -= p[pixels + k];
        }
      }
    }
    return out;
  };
  return LinearMap(2 * pixels, pixels, forward, transpose, "gradient");
}

/// Σ_pixels |g|_pixel for a two-plane field.
inline double isotropic_tv(const Vec& g, Index pixels) {
  double total = 0.0;
  for (Index k = 0; k < pixels; ++k) total += std::hypot(g[k], g[pixels + k]);
  return total;
}

/// Σ_pixels h(|g|_pixel) with h the conjugate of the dual term
/// I{|p| ≤ λ₁} + (ε/2)|p|²: quadratic below λ₁ε, λ₁s − λ₁²ε/2 above.
inline double huber_tv(const Vec& g, Index pixels, double lambda1, double eps) {
  double total = 0.0;
  for (Index k = 0; k < pixels; ++k) {
    const double s = std::hypot(g[k], g[pixels + k]);
    if (eps > 0.0 && s <= lambda1 * eps)
      total += s * s / (2.0 * eps);
    else
      total += lambda1 * s - 0.5 * lambda1 * lambda1 * eps;
  }
  return total;
}

namespace detail {

struct Ellipse {
  double value, a, b, x0, y0, phi_deg;
};

// Modified (higher-contrast) Shepp-Logan parameters on [-1, 1]^2.
inline constexpr std::array<Ellipse, 10> kSheppLogan{{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
}};

inline double shepp_logan_at(double x, double y) {
  constexpr double kPi = 3.14159265358979323846;
  double v = 0.0;
  for (const auto& e : kSheppLogan) {
    const double c = std::cos(e.phi_deg * kPi / 180.0);
    const double s = std::sin(e.phi_deg * kPi / 180.0);
    const double dx = x - e.x0;
    const double dy = y - e.y0;
    const double u = (dx * c + dy * s) / e.a;
    const double w = (-dx * s + dy * c) / e.b;
    if (u * u + w * w <= 1.0) v += e.value;
  }
  return v;
}

}  // namespace detail

/// Ten-ellipse Shepp-Logan phantom sampled at pixel centres of [-1, 1]²,
/// clipped to [0, 1].
inline ImageGrid shepp_logan(Index m, Index n) {
  require(m >= 16 && n >= 16, ErrorKind::InvalidParameter, "shepp_logan: image must be at least 16x16");
  ImageGrid img(m, n);
  for (Index i = 0; i < m; ++i) {
    const double y = 1.0 - (2.0 * i + 1.0) / static_cast<double>(m);
    for (Index j = 0; j < n; ++j) {
      const double x = (2.0 * j + 1.0) / static_cast<double>(n) - 1.0;
      img(i, j) = std::clamp(detail::shepp_logan_at(x, y), 0.0, 1.0);
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// I/O

/// Binary PGM (P5), 8-bit, fixed [0, 1] window; values outside are clipped.
inline void write_pgm(std::ostream& os, const ImageGrid& img) {
  os << "P5\n" << img.cols << ' ' << img.rows << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(img.values.size()));
  for (Index k = 0; k < img.values.size(); ++k) {
    const double v = std::isfinite(img.values[k]) ? std::clamp(img.values[k], 0.0, 1.0) : 0.0;
    bytes[static_cast<std::size_t>(k)] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Reads a P5 image back into [0, 1] values.
inline ImageGrid read_pgm(std::istream& is) {
  std::string magic;
  long cols = 0, rows = 0, maxval = 0;
  if (!(is >> magic) || magic != "P5") throw Error(ErrorKind::ParseError, "PGM: expected P5 header");
  if (!(is >> cols >> rows >> maxval) || cols < 1 || rows < 1 || maxval != 255)
    throw Error(ErrorKind::ParseError, "PGM: bad dimensions or maxval");
  is.get();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(rows * cols));
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw Error(ErrorKind::ParseError, "PGM: truncated pixel data");
  ImageGrid img(rows, cols);
  for (std::size_t k = 0; k < bytes.size(); ++k) img.values[static_cast<Index>(k)] = bytes[k] / 255.0;
  return img;
}

/// One CSV line per image row, full precision.
inline void write_image_csv(std::ostream& os, const ImageGrid& img) {
  for (Index i = 0; i < img.rows; ++i) {
    for (Index j = 0; j < img.cols; ++j) {
      if (j) os << ',';
      os << format_double(img(i, j));
    }
    os << '\n';
  }
}

}  // namespace cpmm
