#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace tubelab {

using Vec = Eigen::VectorXd;

/// Unit vector with a canonical sign.
///
/// Lines are unoriented, so u and -u describe the same direction. The stored
/// representative has its first coordinate of magnitude > 1e-9 positive.
class Direction {
 public:
  /// Normalizes `v` and fixes the sign. Throws DomainError on a zero vector.
  explicit Direction(const Vec& v);

  const Vec& vec() const { return u_; }
  int dim() const { return static_cast<int>(u_.size()); }
  double operator[](int i) const { return u_[i]; }

  friend bool operator==(const Direction& a, const Direction& b) { return a.u_ == b.u_; }

 private:
  Vec u_;
};

/// Element of the line space: a direction plus the foot point x with x . u = 0.
class Line {
 public:
  /// Line through `through` with direction `u`; the foot point is recomputed.
  Line(Direction u, const Vec& through);

  const Direction& direction() const { return u_; }
  const Vec& foot() const { return x_; }
  int dim() const { return u_.dim(); }

 private:
  Direction u_;
  Vec x_;
};

/// k-dimensional linear subspace stored as an orthonormal basis, 1 <= k < n.
class Subspace {
 public:
  /// Orthonormalizes `vectors` (Gram-Schmidt, in order). Throws DomainError
  /// if they are linearly dependent or k is outside [1, n).
  static Subspace span(std::span<const Vec> vectors);

  const std::vector<Vec>& basis() const { return basis_; }
  int dim() const { return static_cast<int>(basis_.size()); }
  int ambient_dim() const { return static_cast<int>(basis_.front().size()); }

  /// Component of v orthogonal to the subspace.
  Vec orthogonal_part(const Vec& v) const;

 private:
  explicit Subspace(std::vector<Vec> basis) : basis_(std::move(basis)) {}
  std::vector<Vec> basis_;
};

/// Closed neighborhood of a segment: every point within `radius` of the core
/// segment centered at `center` with direction `direction` and length `length`.
struct Tube {
  Tube(const Vec& center, Direction direction, double radius, double length = 1.0);

  Vec center;
  Direction direction;
  double radius;
  double length;

  int dim() const { return static_cast<int>(center.size()); }
  Vec endpoint_lo() const { return center - 0.5 * length * direction.vec(); }
  Vec endpoint_hi() const { return center + 0.5 * length * direction.vec(); }
};

/// Antipodally symmetric cover of S^{n-1} by caps of angular diameter rho.
///
/// A unit vector v lies in the cap of center c when the unoriented angle
/// acos(|v . c|) is at most rho / 2.
struct CapCover {
  int n = 0;
  double rho = 0.0;
  std::vector<Direction> centers;

  double cap_radius() const { return 0.5 * rho; }
  bool contains(std::size_t cap, const Vec& v) const;
  /// Indices of all caps containing v, in increasing order.
  std::vector<std::size_t> caps_containing(const Vec& v) const;
};

// -- operations ------------------------------------------------------------

/// |x_a - x_b| + |u_a ^ u_b|.
double line_metric(const Line& a, const Line& b);

/// sqrt(det Gram(vs)), clamped at zero. Inputs must be unit vectors, k <= n.
double wedge_volume(std::span<const Vec> vs);

/// |b_1 ^ ... ^ b_k ^ u| for an orthonormal basis b of H.
double subspace_wedge(const Subspace& h, const Vec& u);

/// Unoriented angle between two unit vectors, in [0, pi/2].
double unoriented_angle(const Vec& a, const Vec& b);

/// Deterministic cover built by projecting a lattice on the surface of the
/// cube [-1,1]^n onto the sphere. Throws DomainError unless n >= 2 and
/// rho in (0, 1].
CapCover build_cap_cover(int n, double rho);

/// Euclidean distance from p to the core segment of t.
double distance_to_core(const Tube& t, const Vec& p);

/// True iff p is within t.radius of the core segment.
bool point_in_tube(const Tube& t, const Vec& p);

Line line_of_tube(const Tube& t);

/// Axis-aligned unit vector e_i in R^n.
Vec basis_vector(int n, int i);

}  // namespace tubelab
