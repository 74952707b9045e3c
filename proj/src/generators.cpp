#include "tubelab/generators.hpp"

#include "tubelab/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tubelab {

namespace {

// Unoriented direction net of S^{d-1} with about delta^{-(d-1)} points.
std::vector<Vec> plane_directions(int d, double delta) {
  std::vector<Vec> out;
  if (d == 1) {
    out.push_back(basis_vector(1, 0));
    return out;
  }
  if (d == 2) {
    const int m = std::max(1, static_cast<int>(std::lround(1.0 / delta)));
    for (int i = 0; i < m; ++i) {
      const double t = std::numbers::pi * i / m;
      out.push_back((Vec(2) << std::cos(t), std::sin(t)).finished());
    }
    return out;
  }
  // golden spiral on the upper hemisphere, equal-area in z
  const int m = std::max(1, static_cast<int>(std::lround(1.0 / (delta * delta))));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < m; ++i) {
    const double z = 1.0 - (i + 0.5) / m;
    const double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
    out.push_back((Vec(3) << rr * std::cos(golden * i), rr * std::sin(golden * i), z).finished());
  }
  return out;
}

// Cell centers of the delta-grid of [-1/2, 1/2]^m.
std::vector<Vec> centered_grid(int m, double delta) {
  const int side = std::max(1, static_cast<int>(std::lround(1.0 / delta)));
  const double h = 1.0 / side;
  std::vector<Vec> out;
  if (m == 0) {
    out.push_back(Vec(0));
    return out;
  }
  std::vector<int> idx(m, 0);
  while (true) {
    Vec p(m);
    for (int a = 0; a < m; ++a) p[a] = -0.5 + (idx[a] + 0.5) * h;
    out.push_back(p);
    int a = 0;
    for (; a < m; ++a) {
      if (++idx[a] < side) break;
      idx[a] = 0;
    }
    if (a == m) break;
  }
  return out;
}

void check_delta(double delta) {
  if (!(delta > 0.0) || delta > 0.5) throw DomainError(fmt::format("delta must lie in (0, 1/2], got {}", delta));
}

Line random_line_meeting_ball(Rng& rng, int n) {
  const Vec u = rng.unit_vector(n);
  Vec g = rng.gaussian_vector(n);
  g -= g.dot(u) * u;
  const double norm = g.norm();
  if (norm < 1e-12) return Line(Direction(u), Vec::Zero(n));
  const double radius = std::pow(rng.uniform(), 1.0 / (n - 1));
  return Line(Direction(u), radius * g / norm);
}

}  // namespace

void GeneratorSpec::validate() const {
  if (n < 2 || n > Limits::max_grid_dim) throw DomainError(fmt::format("n must lie in [2, {}], got {}", Limits::max_grid_dim, n));
  if (d < 1 || d >= n) throw DomainError(fmt::format("need 1 <= d < n, got d = {}", d));
  if (!(beta > 0.0) || beta > 1.0) throw DomainError(fmt::format("beta must lie in (0, 1], got {}", beta));
  check_delta(delta);
  if (kind == Kind::bush && count < 1) throw DomainError("bush needs a positive count");
  if (kind == Kind::axes && (count < 1 || k < 2 || k > n)) throw DomainError("axes needs count >= 1 and 2 <= k <= n");
}

std::string to_string(GeneratorSpec::Kind kind) {
  switch (kind) {
    case GeneratorSpec::Kind::planes: return "planes";
    case GeneratorSpec::Kind::random_nonconcentrated: return "random-nonconcentrated";
    case GeneratorSpec::Kind::bush: return "bush";
    case GeneratorSpec::Kind::axes: return "axes";
  }
  return "planes";
}

GeneratorSpec::Kind parse_generator_kind(const std::string& name) {
  for (auto k : {GeneratorSpec::Kind::planes, GeneratorSpec::Kind::random_nonconcentrated, GeneratorSpec::Kind::bush,
                 GeneratorSpec::Kind::axes})
    if (to_string(k) == name) return k;
  throw DomainError(fmt::format("unknown generator kind '{}'", name));
}

std::vector<double> cantor_offsets(double beta, double delta) {
  if (!(beta > 0.0) || beta > 1.0) throw DomainError("beta must lie in (0, 1]");
  check_delta(delta);
  const int levels = static_cast<int>(std::lround(beta * std::log2(1.0 / delta)));
  const double ratio = std::exp2(-1.0 / beta);
  std::vector<double> lo{-0.5};
  double len = 1.0;
  for (int l = 0; l < levels; ++l) {
    std::vector<double> next;
    next.reserve(2 * lo.size());
    const double child = ratio * len;
    for (double a : lo) {
      next.push_back(a);
      next.push_back(a + len - child);
    }
    lo = std::move(next);
    len = child;
  }
  std::vector<double> out;
  for (double a : lo) out.push_back(a + 0.5 * len);
  return out;
}

TubeFamily gen_lines_in_planes(int n, int d, double beta, double delta, std::uint64_t seed, std::size_t size_cap) {
  GeneratorSpec spec{GeneratorSpec::Kind::planes, n, d, beta, delta, seed, size_cap};
  spec.validate();
  const auto offsets = cantor_offsets(beta, delta);
  const auto dirs = plane_directions(d, delta);
  const auto feet = centered_grid(d - 1, delta);
  const std::size_t total = offsets.size() * dirs.size() * feet.size();
  if (total > size_cap)
    throw BudgetExceeded(fmt::format("gen_lines_in_planes would produce {} tubes (cap {}); use a larger delta", total, size_cap));

  std::vector<Tube> tubes;
  tubes.reserve(total);
  for (double t : offsets)
    for (const Vec& w : dirs) {
      // orthonormal basis of w-perp inside the plane
      Eigen::MatrixXd comp(d, d - 1);
      if (d > 1) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
        Eigen::MatrixXd q = qr.householderQ();
        comp = q.rightCols(d - 1);
      }
      Vec u = Vec::Zero(n);
      u.head(d) = w;
      for (const Vec& f : feet) {
        Vec c = Vec::Zero(n);
        if (d > 1) c.head(d) = comp * f;
        c[d] = t;
        tubes.emplace_back(c, Direction(u), delta);
      }
    }
  return TubeFamily(n, delta, spec.params(), std::move(tubes));
}

NonConcentratedSampler::NonConcentratedSampler(int n, double delta, double s) : n_(n), delta_(delta) {
  radii_ = BallNet::enclosing(n, delta).radii();
  for (double r : radii_) budget_.push_back(std::pow(r / delta, s) * (1 + 1e-12));
}

bool NonConcentratedSampler::try_add(const Line& l) {
  if (l.dim() != n_) throw DomainError("line dimension differs from the sampler");
  const std::size_t R = radii_.size();
  std::vector<int> own(R, 1);
  std::vector<std::pair<std::size_t, std::size_t>> hits;  // (line, first radius index)
  for (std::size_t j = 0; j < lines_.size(); ++j) {
    const double dist = line_metric(l, lines_[j]);
    std::size_t k = 0;
    while (k < R && dist > 2.0 * radii_[k] * (1 + 1e-12)) ++k;
    if (k == R) continue;
    hits.emplace_back(j, k);
    for (std::size_t m = k; m < R; ++m) ++own[m];
  }
  for (std::size_t m = 0; m < R; ++m)
    if (own[m] > budget_[m]) return false;
  for (auto [j, k] : hits)
    for (std::size_t m = k; m < R; ++m)
      if (counts_[j][m] + 1 > budget_[m]) return false;
  for (auto [j, k] : hits)
    for (std::size_t m = k; m < R; ++m) ++counts_[j][m];
  lines_.push_back(l);
  counts_.push_back(std::move(own));
  return true;
}

GeneratedFamily gen_random_nonconcentrated(int n, int d, double beta, double delta, std::uint64_t seed,
                                           std::size_t size_cap) {
  GeneratorSpec spec{GeneratorSpec::Kind::random_nonconcentrated, n, d, beta, delta, seed, size_cap};
  spec.validate();
  const double s = spec.params().concentration_exponent();
  const auto target = static_cast<std::size_t>(std::floor(std::pow(delta, -s) + 1e-9));
  if (target > size_cap)
    throw BudgetExceeded(fmt::format("target of {} tubes exceeds the cap {}; use a larger delta", target, size_cap));

  Rng rng(seed);
  NonConcentratedSampler sampler(n, delta, s);
  const std::size_t budget = static_cast<std::size_t>(Limits::stall_factor) * target;
  std::size_t drawn = 0;
  while (sampler.size() < target && drawn < budget) {
    ++drawn;
    sampler.try_add(random_line_meeting_ball(rng, n));
  }
  std::vector<Tube> tubes;
  for (const auto& l : sampler.lines()) tubes.emplace_back(l.foot(), l.direction(), delta);
  return {TubeFamily(n, delta, spec.params(), std::move(tubes)), sampler.size() < target, target, drawn};
}

TubeFamily gen_bush(int n, double delta, int count, ProblemParams params) {
  check_delta(delta);
  if (count < 1) throw DomainError("bush needs a positive count");
  std::vector<Vec> dirs;
  if (n == 2) {
    for (int i = 0; i < count; ++i) {
      const double t = std::numbers::pi * i / count;
      dirs.push_back((Vec(2) << std::cos(t), std::sin(t)).finished());
    }
  } else {
    // refine the cap cover until it has enough centers, then spread the picks
    double rho = 1.0;
    CapCover cover = build_cap_cover(n, rho);
    while (cover.centers.size() < static_cast<std::size_t>(count)) cover = build_cap_cover(n, rho /= 2);
    const std::size_t m = cover.centers.size();
    for (int i = 0; i < count; ++i) dirs.push_back(cover.centers[i * m / count].vec());
  }
  std::vector<Tube> tubes;
  for (const auto& u : dirs) tubes.emplace_back(Vec::Zero(n), Direction(u), delta);
  return TubeFamily(n, delta, params, std::move(tubes));
}

std::vector<TubeFamily> gen_axes(int n, int k, double delta, int per_family_count, ProblemParams params) {
  check_delta(delta);
  if (k < 1 || k > n) throw DomainError("need 1 <= k <= n");
  if (per_family_count < 1) throw DomainError("axes needs a positive count");
  const int m = n - 1;
  const int side = static_cast<int>(std::ceil(std::pow(per_family_count, 1.0 / m) - 1e-9));
  auto coord = [&](int j) { return side == 1 ? 0.0 : -0.35 + 0.7 * j / (side - 1); };

  std::vector<TubeFamily> out;
  for (int i = 0; i < k; ++i) {
    std::vector<Tube> tubes;
    std::vector<int> idx(m, 0);
    for (int c = 0; c < per_family_count; ++c) {
      Vec center = Vec::Zero(n);
      for (int a = 0, slot = 0; a < n; ++a)
        if (a != i) center[a] = coord(idx[slot++]);
      tubes.emplace_back(center, Direction(basis_vector(n, i)), delta);
      for (int a = 0; a < m; ++a) {
        if (++idx[a] < side) break;
        idx[a] = 0;
      }
    }
    out.emplace_back(n, delta, params, std::move(tubes));
  }
  return out;
}

TubeFamily generate(const GeneratorSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case GeneratorSpec::Kind::planes:
      return gen_lines_in_planes(spec.n, spec.d, spec.beta, spec.delta, spec.seed, spec.size_cap);
    case GeneratorSpec::Kind::random_nonconcentrated:
      return gen_random_nonconcentrated(spec.n, spec.d, spec.beta, spec.delta, spec.seed, spec.size_cap).family;
    case GeneratorSpec::Kind::bush:
      return gen_bush(spec.n, spec.delta, spec.count, spec.params());
    case GeneratorSpec::Kind::axes: {
      std::vector<Tube> all;
      for (const auto& f : gen_axes(spec.n, spec.k, spec.delta, spec.count, spec.params()))
        all.insert(all.end(), f.tubes().begin(), f.tubes().end());
      return TubeFamily(spec.n, spec.delta, spec.params(), std::move(all));
    }
  }
  throw DomainError("unknown generator kind");
}

}  // namespace tubelab
