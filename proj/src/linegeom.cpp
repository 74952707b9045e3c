#include "tubelab/linegeom.hpp"

#include "tubelab/config.hpp"
#include "tubelab/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tubelab {

namespace {

void require_same_dim(long a, long b, const char* what) {
  if (a != b) throw DomainError(fmt::format("{}: dimension mismatch ({} vs {})", what, a, b));
}

// |a ^ b|^2 as the sum of squared 2x2 minors; avoids the cancellation in
// 1 - (a.b)^2 for nearly parallel vectors.
double wedge2_squared(const Vec& a, const Vec& b) {
  double s = 0.0;
  const auto n = a.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double m = a[i] * b[j] - a[j] * b[i];
      s += m * m;
    }
  }
  return s;
}

}  // namespace

Direction::Direction(const Vec& v) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw DomainError("Direction: zero or non-finite vector");
  u_ = v / norm;
  for (Eigen::Index i = 0; i < u_.size(); ++i) {
    if (std::abs(u_[i]) > Tolerances::sign_cutoff) {
      if (u_[i] < 0.0) u_ = -u_;
      break;
    }
  }
}

Line::Line(Direction u, const Vec& through) : u_(std::move(u)) {
  require_same_dim(u_.vec().size(), through.size(), "Line");
  x_ = through - through.dot(u_.vec()) * u_.vec();
}

Subspace Subspace::span(std::span<const Vec> vectors) {
  if (vectors.empty()) throw DomainError("Subspace: empty spanning set");
  const auto n = vectors.front().size();
  if (static_cast<long>(vectors.size()) >= n)
    throw DomainError(fmt::format("Subspace: dimension {} not below ambient {}", vectors.size(), n));
  std::vector<Vec> basis;
  basis.reserve(vectors.size());
  for (const auto& v : vectors) {
    require_same_dim(v.size(), n, "Subspace");
    Vec w = v;
    // two passes of modified Gram-Schmidt keep the basis orthonormal to 1e-15
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) w -= w.dot(b) * b;
    const double norm = w.norm();
    if (norm <= 1e-12 * std::max(1.0, v.norm())) throw DomainError("Subspace: linearly dependent spanning set");
    basis.push_back(w / norm);
  }
  return Subspace(std::move(basis));
}

Vec Subspace::orthogonal_part(const Vec& v) const {
  require_same_dim(v.size(), ambient_dim(), "Subspace::orthogonal_part");
  Vec w = v;
  for (const auto& b : basis_) w -= w.dot(b) * b;
  return w;
}

Tube::Tube(const Vec& c, Direction d, double r, double len)
    : center(c), direction(std::move(d)), radius(r), length(len) {
  require_same_dim(center.size(), direction.vec().size(), "Tube");
  if (!(radius > 0.0) || radius > 1.0) throw DomainError(fmt::format("Tube: radius {} outside (0, 1]", radius));
  if (!(length > 0.0)) throw DomainError("Tube: non-positive length");
}

bool CapCover::contains(std::size_t cap, const Vec& v) const {
  return unoriented_angle(centers[cap].vec(), v) <= cap_radius();
}

std::vector<std::size_t> CapCover::caps_containing(const Vec& v) const {
  std::vector<std::size_t> out;
  // cos is decreasing on [0, pi/2]: compare |v . c| against cos(radius)
  const double threshold = std::cos(cap_radius());
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double c = std::abs(centers[i].vec().dot(v));
    if (c >= threshold - 1e-15 && contains(i, v)) out.push_back(i);
  }
  return out;
}

double line_metric(const Line& a, const Line& b) {
  require_same_dim(a.dim(), b.dim(), "line_metric");
  const double foot = (a.foot() - b.foot()).norm();
  const double wedge = std::sqrt(wedge2_squared(a.direction().vec(), b.direction().vec()));
  return foot + std::min(1.0, wedge);
}

double wedge_volume(std::span<const Vec> vs) {
  if (vs.empty()) throw DomainError("wedge_volume: empty input");
  const auto n = vs.front().size();
  if (static_cast<long>(vs.size()) > n)
    throw DomainError(fmt::format("wedge_volume: {} vectors in dimension {}", vs.size(), n));
  for (const auto& v : vs) {
    require_same_dim(v.size(), n, "wedge_volume");
    if (std::abs(v.norm() - 1.0) > Tolerances::unit_input) throw DomainError("wedge_volume: non-unit input vector");
  }
  const auto k = static_cast<Eigen::Index>(vs.size());
  if (k == 1) return 1.0;
  if (k == 2) return std::min(1.0, std::sqrt(wedge2_squared(vs[0], vs[1])));
  Eigen::MatrixXd gram(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j) gram(i, j) = gram(j, i) = vs[i].dot(vs[j]);
  const double det = gram.determinant();
  return std::clamp(std::sqrt(std::max(0.0, det)), 0.0, 1.0);
}

double subspace_wedge(const Subspace& h, const Vec& u) {
  if (h.dim() + 1 > h.ambient_dim()) throw DomainError("subspace_wedge: k + 1 exceeds n");
  // for an orthonormal basis the Gram determinant of (b_1..b_k, u) equals
  // |u_perp|^2, the squared component of u orthogonal to H
  return std::min(1.0, h.orthogonal_part(u).norm());
}

double unoriented_angle(const Vec& a, const Vec& b) {
  const double c = std::abs(a.dot(b));
  const double s = std::sqrt(wedge2_squared(a, b));
  return std::atan2(s, c);
}

CapCover build_cap_cover(int n, double rho) {
  if (n < 2) throw DomainError("build_cap_cover: n must be at least 2");
  if (!(rho > 0.0) || rho > 1.0) throw DomainError(fmt::format("build_cap_cover: rho {} outside (0, 1]", rho));
  // Lattice {0..m}^n on the cube surface, mapped to [-1,1]^n. A face cell has
  // half-diagonal sqrt(n-1)/m; radial projection onto the sphere is
  // 1-Lipschitz outside the unit ball, so the chord to the nearest center is
  // at most that, and the angle 2 asin(chord/2) stays below rho/2.
  const double chord = 2.0 * std::sin(rho / 4.0);
  const int m = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n - 1)) / chord));
  CapCover cover;
  cover.n = n;
  cover.rho = rho;
  std::vector<int> idx(n, 0);
  while (true) {
    bool on_surface = false;
    int first_nonzero = 0;
    for (int i = 0; i < n; ++i) {
      if (idx[i] == 0 || idx[i] == m) on_surface = true;
      const int c = 2 * idx[i] - m;
      if (first_nonzero == 0 && c != 0) first_nonzero = c;
    }
    // lattice is symmetric under p -> -p; keep one representative per pair
    if (on_surface && first_nonzero > 0) {
      Vec p(n);
      for (int i = 0; i < n; ++i) p[i] = (2.0 * idx[i] - m) / m;
      cover.centers.emplace_back(p);
    }
    int d = n - 1;
    while (d >= 0 && ++idx[d] > m) idx[d--] = 0;
    if (d < 0) break;
  }
  return cover;
}

double distance_to_core(const Tube& t, const Vec& p) {
  require_same_dim(t.dim(), p.size(), "distance_to_core");
  const Vec w = p - t.center;
  const double s = std::clamp(w.dot(t.direction.vec()), -0.5 * t.length, 0.5 * t.length);
  return (w - s * t.direction.vec()).norm();
}

bool point_in_tube(const Tube& t, const Vec& p) { return distance_to_core(t, p) <= t.radius; }

Line line_of_tube(const Tube& t) { return Line(t.direction, t.center); }

Vec basis_vector(int n, int i) {
  Vec e = Vec::Zero(n);
  e[i] = 1.0;
  return e;
}

}  // namespace tubelab
