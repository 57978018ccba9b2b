#include "driftmon/split_rule.hpp"

#include <cmath>

#include "driftmon/error.hpp"

namespace driftmon {

namespace {

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

bool needs_flip(const Vec3& v) {
  for (double a : v) {
    if (a > 0.0) return false;
    if (a < 0.0) return true;
  }
  return false;
}

}  // namespace

Vec3 canonical_direction(const Vec3& v) {
  return canonicalize(v, 0.0).alpha;
}

SplitRule canonicalize(const Vec3& alpha, double c) {
  const double len = norm(alpha);
  if (!(len > 0.0) || !std::isfinite(len)) throw PreconditionError("split direction must be nonzero");
  SplitRule r;
  const double s = needs_flip(alpha) ? -1.0 : 1.0;
  for (int i = 0; i < 3; ++i) r.alpha[i] = s * alpha[i] / len;
  r.c = s * c / len;
  // Renormalizing an already-unit vector can move it by an ulp; a second pass
  // makes the map idempotent.
  const double len2 = norm(r.alpha);
  if (len2 != 1.0) {
    for (double& a : r.alpha) a /= len2;
    r.c /= len2;
  }
  return r;
}

bool is_canonical(const Vec3& alpha, double tol) {
  return std::abs(norm(alpha) - 1.0) <= tol && !needs_flip(alpha) &&
         (alpha[0] != 0.0 || alpha[1] != 0.0 || alpha[2] != 0.0);
}

}  // namespace driftmon
