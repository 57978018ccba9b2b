#pragma once

#include <array>

namespace driftmon {

using Vec3 = std::array<double, 3>;

/// Projection alpha . z. Every routing decision in the library goes through
/// this one function so training and prediction agree bit for bit.
inline double project(const Vec3& alpha, double x, double y, double t) {
  return alpha[0] * x + alpha[1] * y + alpha[2] * t;
}

/// Unit direction with its first nonzero component positive.
/// Throws PreconditionError for the zero vector.
Vec3 canonical_direction(const Vec3& v);

/// Oblique split: points with alpha . z <= c go left.
struct SplitRule {
  Vec3 alpha{1.0, 0.0, 0.0};
  double c = 0.0;

  bool goes_left(double x, double y, double t) const { return project(alpha, x, y, t) <= c; }

  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

/// Normalizes (alpha, c) by |alpha| and flips both signs if needed so alpha is
/// canonical. canonicalize(a, c) == canonicalize(-a, -c); the represented
/// hyperplane is unchanged.
SplitRule canonicalize(const Vec3& alpha, double c);

bool is_canonical(const Vec3& alpha, double tol = 1e-12);

}  // namespace driftmon
