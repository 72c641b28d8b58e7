#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>

#include "cpmm/linear_map.hpp"

namespace cpmm {

struct NormEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;

  operator double() const noexcept { return value; }  // NOLINT(google-explicit-constructor)
};

/// Spectral norm by power iteration on transpose∘apply from a seeded
/// Gaussian start. Stops when the relative change of the estimate drops
/// below `tol`; otherwise returns the last estimate with converged=false.
///
/// The estimate ‖M v‖ for unit v is a Rayleigh-quotient lower bound and is
/// nondecreasing along the iteration.
inline NormEstimate estimate_operator_norm(const LinearMap& map, double tol = 1e-10,
                                           int max_iter = 10000, std::uint64_t seed = 0) {
  require(tol > 0.0, ErrorKind::InvalidParameter, "estimate_operator_norm: tol must be positive");
  require(max_iter >= 1, ErrorKind::InvalidParameter, "estimate_operator_norm: max_iter must be >= 1");
  Rng rng(mix_seed(seed));
  Vec v = gaussian_vector(map.cols(), rng);
  v.normalize();

  NormEstimate out;
  double previous = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vec mv = map.apply(v);
    const double estimate = mv.norm();
    out.value = std::max(out.value, estimate);
    out.iterations = it;
    if (estimate == 0.0) {
      // Either the zero map or a start orthogonal to the row space; the
      // Gaussian start makes the latter a null event.
      out.converged = true;
      return out;
    }
    if (it > 1 && std::abs(estimate - previous) <= tol * estimate) {
      out.converged = true;
      return out;
    }
    previous = estimate;
    Vec w = map.apply_transpose(mv);
    const double wn = w.norm();
    if (wn == 0.0) {
      out.converged = true;
      return out;
    }
    v = w / wn;
  }
  return out;
}

/// Max over seeded probe pairs of |<Ax, y> - <x, A^T y>| / (‖x‖‖y‖).
inline double adjointness_defect(const LinearMap& map, int trials = 20, std::uint64_t seed = 0) {
  require(trials >= 1, ErrorKind::InvalidParameter, "adjointness_defect: trials must be >= 1");
  Rng rng(mix_seed(seed, 1));
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vec x = gaussian_vector(map.cols(), rng);
    const Vec y = gaussian_vector(map.rows(), rng);
    const double lhs = map.apply(x).dot(y);
    const double rhs = x.dot(map.apply_transpose(y));
    worst = std::max(worst, std::abs(lhs - rhs) / (x.norm() * y.norm()));
  }
  return worst;
}

/// Forward operator A paired with the surrogate V whose transpose replaces
/// A^T in the primal update.
struct MismatchedPair {
  LinearMap forward;
  LinearMap surrogate;
  std::optional<double> mismatch_norm;  // ‖A - V‖, written once

  MismatchedPair(LinearMap a, LinearMap v) : forward(std::move(a)), surrogate(std::move(v)) {
    if (forward.rows() != surrogate.rows() || forward.cols() != surrogate.cols())
      throw Error(ErrorKind::DimensionMismatch, "mismatched pair: A and V shapes differ");
  }
};

/// ‖A - V‖ by power iteration on the difference map; cached in the pair.
inline double mismatch_norm(MismatchedPair& pair, double tol = 1e-10, std::uint64_t seed = 0,
                            int max_iter = 10000) {
  if (pair.mismatch_norm) return *pair.mismatch_norm;
  const double value =
      estimate_operator_norm(difference(pair.forward, pair.surrogate), tol, max_iter, seed).value;
  pair.mismatch_norm = value;
  return value;
}

}  // namespace cpmm
