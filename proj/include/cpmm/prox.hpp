#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "cpmm/errors.hpp"
#include "cpmm/random.hpp"

namespace cpmm {

/// A proper convex function known through its proximal map
/// prox_{t f}(x) = argmin_y f(y) + ‖y - x‖²/(2t), together with its
/// strong-convexity modulus γ (0 if merely convex).
class ProxFn {
 public:
  using EvalFn = std::function<Vec(const Vec&, double)>;
  using ObjectiveFn = std::function<double(const Vec&)>;

  ProxFn(Eigen::Index dim, double strong_convexity, EvalFn evaluate, std::string name,
         ObjectiveFn objective = {})
      : dim_(dim),
        strong_convexity_(strong_convexity),
        evaluate_(std::move(evaluate)),
        name_(std::move(name)),
        objective_(std::move(objective)) {
    require(dim_ >= 1, ErrorKind::InvalidParameter, "prox dimension must be positive");
    require(strong_convexity_ >= 0.0, ErrorKind::InvalidParameter,
            "strong convexity modulus must be nonnegative");
  }

  Eigen::Index dim() const noexcept { return dim_; }
  double strong_convexity() const noexcept { return strong_convexity_; }
  const std::string& name() const noexcept { return name_; }
  bool has_objective() const noexcept { return static_cast<bool>(objective_); }

  /// prox_{step·f}(point)
  Vec operator()(const Vec& point, double step) const {
    if (point.size() != dim_)
      throw Error(ErrorKind::DimensionMismatch,
                  name_ + ": expected " + std::to_string(dim_) + " entries, got " +
                      std::to_string(point.size()));
    require(step > 0.0, ErrorKind::InvalidParameter, name_ + ": prox step must be positive");
    return evaluate_(point, step);
  }

  Vec evaluate(const Vec& point, double step) const { return (*this)(point, step); }

  /// f(point); +inf outside the domain of indicator terms.
  double objective(const Vec& point) const {
    if (!objective_) throw Error(ErrorKind::Unavailable, name_ + ": no objective attached");
    return objective_(point);
  }

 private:
  Eigen::Index dim_;
  double strong_convexity_;
  EvalFn evaluate_;
  std::string name_;
  ObjectiveFn objective_;
};

/// G(x) = (α/2)‖x‖²:  prox_{τG}(x) = x/(1+τα).
inline ProxFn prox_scaled_sqnorm(double alpha, Eigen::Index dim) {
  require(alpha > 0.0, ErrorKind::InvalidParameter, "prox_scaled_sqnorm: alpha must be positive");
  return ProxFn(
      dim, alpha, [alpha](const Vec& x, double t) -> Vec { return x / (1.0 + t * alpha); },
      "scaled_sqnorm", [alpha](const Vec& x) { return 0.5 * alpha * x.squaredNorm(); });
}

/// F*(y) = (β/2)‖y‖² + <y, z>, the conjugate of F(w) = ‖w - z‖²/(2β):
/// prox_{σF*}(y) = (y - σz)/(1+σβ).
inline ProxFn prox_quadratic_dual(double beta, Vec z) {
  require(beta > 0.0, ErrorKind::InvalidParameter, "prox_quadratic_dual: beta must be positive");
  auto data = std::make_shared<const Vec>(std::move(z));
  return ProxFn(
      data->size(), beta,
      [beta, data](const Vec& y, double s) -> Vec { return (y - s * (*data)) / (1.0 + s * beta); },
      "quadratic_dual",
      [beta, data](const Vec& y) { return 0.5 * beta * y.squaredNorm() + y.dot(*data); });
}

inline ProxFn prox_zero(Eigen::Index dim) {
  return ProxFn(
      dim, 0.0, [](const Vec& x, double) -> Vec { return x; }, "zero",
      [](const Vec&) { return 0.0; });
}

/// Indicator of the box [-radius, radius]^dim.
inline ProxFn prox_box_indicator(double radius, Eigen::Index dim) {
  require(radius > 0.0, ErrorKind::InvalidParameter, "prox_box_indicator: radius must be positive");
  return ProxFn(
      dim, 0.0,
      [radius](const Vec& y, double) -> Vec { return y.cwiseMax(-radius).cwiseMin(radius); },
      "box_indicator",
      [radius](const Vec& y) {
        return y.cwiseAbs().maxCoeff() <= radius ? 0.0 : std::numeric_limits<double>::infinity();
      });
}

/// Shape of a per-pixel 2-vector field stored as two m×n planes
/// (plane k holds component k, row-major within the plane).
struct FieldShape {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index pixels() const noexcept { return rows * cols; }
  Eigen::Index size() const noexcept { return 2 * rows * cols; }
};

namespace detail {

// Radial projection of each pixel's 2-vector onto the ball of radius r.
inline void project_pixel_balls(Vec& p, Eigen::Index pixels, double r) {
  for (Eigen::Index k = 0; k < pixels; ++k) {
    const double a = p[k];
    const double b = p[pixels + k];
    const double mag = std::sqrt(a * a + b * b);
    if (mag > r) {
      const double s = r / mag;
      p[k] = a * s;
      p[pixels + k] = b * s;
    }
  }
}

inline double max_pixel_magnitude(const Vec& p, Eigen::Index pixels) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < pixels; ++k)
    worst = std::max(worst, std::hypot(p[k], p[pixels + k]));
  return worst;
}

}  // namespace detail

/// Dual of Huber-smoothed isotropic TV:
/// F*(p) = I{|p|_pixel ≤ λ₁}(p) + (ε/2)‖p‖².
/// prox divides by (1+σε) and then projects each pixel onto the λ₁-ball;
/// the two commute because both terms are radial.
inline ProxFn prox_huber_tv_dual(double lambda1, double eps, FieldShape shape) {
  require(lambda1 > 0.0, ErrorKind::InvalidParameter, "prox_huber_tv_dual: lambda1 must be positive");
  require(eps >= 0.0, ErrorKind::InvalidParameter, "prox_huber_tv_dual: eps must be nonnegative");
  require(shape.rows >= 1 && shape.cols >= 1, ErrorKind::InvalidParameter,
          "prox_huber_tv_dual: empty field shape");
  const Eigen::Index pixels = shape.pixels();
  return ProxFn(
      shape.size(), eps,
      [lambda1, eps, pixels](const Vec& p, double s) -> Vec {
        Vec out = p / (1.0 + s * eps);
        detail::project_pixel_balls(out, pixels, lambda1);
        return out;
      },
      "huber_tv_dual",
      [lambda1, eps, pixels](const Vec& p) {
        // Small relative slack so projected points count as feasible.
        if (detail::max_pixel_magnitude(p, pixels) > lambda1 * (1.0 + 1e-12))
          return std::numeric_limits<double>::infinity();
        return 0.5 * eps * p.squaredNorm();
      });
}

/// Block dual for TV-regularized tomography, y = (q, p):
/// F*(q, p) = ‖q‖²/(2λ₀) + <q, z> + I{|p| ≤ λ₁}(p) + (ε/2)‖p‖².
/// Blocks are proxed independently; the joint modulus is min(1/λ₀, ε).
inline ProxFn prox_ct_dual_block(double lambda0, Vec z_sino, double lambda1, double eps,
                                 FieldShape shape) {
  require(lambda0 > 0.0, ErrorKind::InvalidParameter, "prox_ct_dual_block: lambda0 must be positive");
  ProxFn q_block = prox_quadratic_dual(1.0 / lambda0, std::move(z_sino));
  ProxFn p_block = prox_huber_tv_dual(lambda1, eps, shape);
  const Eigen::Index nq = q_block.dim();
  const Eigen::Index np = p_block.dim();
  const double modulus = std::min(q_block.strong_convexity(), p_block.strong_convexity());
  return ProxFn(
      nq + np, modulus,
      [q_block, p_block, nq, np](const Vec& y, double s) -> Vec {
        Vec out(nq + np);
        out.head(nq) = q_block(y.head(nq), s);
        out.tail(np) = p_block(y.tail(np), s);
        return out;
      },
      "ct_dual_block",
      [q_block, p_block, nq, np](const Vec& y) {
        return q_block.objective(y.head(nq)) + p_block.objective(y.tail(np));
      });
}

}  // namespace cpmm
