#include "tubelab/concentration.hpp"

#include "tubelab/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <unordered_map>

namespace tubelab {

namespace {

constexpr int kMaxDim = 4;

// Lines packed into flat arrays; the metric is |x_a - x_b| + sqrt(1 - (u_a . u_b)^2).
struct Packed {
  int n = 0;
  std::vector<double> u, x;

  explicit Packed(std::span<const Line> lines) {
    if (lines.empty()) return;
    n = lines.front().dim();
    u.resize(lines.size() * n);
    x.resize(lines.size() * n);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].dim() != n) throw DomainError("line set mixes dimensions");
      for (int a = 0; a < n; ++a) {
        u[i * n + a] = lines[i].direction()[a];
        x[i * n + a] = lines[i].foot()[a];
      }
    }
  }

  double dist(std::size_t i, std::size_t j) const {
    const double* ui = &u[i * n];
    const double* uj = &u[j * n];
    const double* xi = &x[i * n];
    const double* xj = &x[j * n];
    double dot = 0.0, dx = 0.0;
    for (int a = 0; a < n; ++a) {
      dot += ui[a] * uj[a];
      const double t = xi[a] - xj[a];
      dx += t * t;
    }
    return std::sqrt(dx) + std::sqrt(std::max(0.0, 1.0 - dot * dot));
  }
};

std::vector<double> dyadic_radii(double delta) {
  if (!(delta > 0.0) || delta > 1.0) throw DomainError(fmt::format("net scale must lie in (0, 1], got {}", delta));
  std::vector<double> r;
  for (double v = delta; v < 1.0 - 1e-12; v *= 2.0) r.push_back(v);
  r.push_back(1.0);
  return r;
}

// Smallest radius index whose ball (at the net's ball radius) contains distance d.
int radius_index(const BallNet& net, double d) {
  const auto& r = net.radii();
  for (std::size_t k = 0; k < r.size(); ++k)
    if (d <= net.ball_radius(k) * (1 + 1e-12)) return static_cast<int>(k);
  return -1;
}

BallMasses enclosing_masses(std::span<const Line> lines, std::span<const double> weights, const BallNet& net) {
  const Packed p(lines);
  const std::size_t N = lines.size();
  const std::size_t R = net.radii().size();
  std::vector<double> hist(N * R, 0.0);
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  for (std::size_t i = 0; i < N; ++i) {
    hist[i * R] += w(i);
    for (std::size_t j = i + 1; j < N; ++j) {
      const int k = radius_index(net, p.dist(i, j));
      if (k < 0) continue;
      hist[i * R + k] += w(j);
      hist[j * R + k] += w(i);
    }
  }
  BallMasses out{net.radii(), std::vector<double>(R, 0.0), std::vector<std::size_t>(R, 0)};
  for (std::size_t i = 0; i < N; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < R; ++k) {
      acc += hist[i * R + k];
      if (acc > out.worst[k]) {
        out.worst[k] = acc;
        out.worst_line[k] = i;
      }
    }
  }
  return out;
}

}  // namespace

// -- product net ---------------------------------------------------------------

namespace detail {

struct CenterKey {
  std::uint32_t cap;
  std::array<std::int32_t, kMaxDim - 1> g;
  bool operator==(const CenterKey&) const = default;
};

struct CenterHash {
  std::size_t operator()(const CenterKey& k) const {
    std::uint64_t h = mix_seed(k.cap);
    for (auto v : k.g) h = mix_seed(h ^ static_cast<std::uint32_t>(v));
    return static_cast<std::size_t>(h);
  }
};

// One scale of the product net: the cap cover, a spatial hash of its centers
// (both signs) and lazily built frames of the orthogonal complements.
class ProductScale {
 public:
  ProductScale(int n, double r) : n_(n), r_(r), cover_(build_cap_cover(n, std::min(1.0, r / 2.0))) {
    frames_.resize(cover_.centers.size());
    all_ = r >= 0.5;
    cell_ = 2.0 * r;
    if (!all_)
      for (std::size_t c = 0; c < cover_.centers.size(); ++c)
        for (double sgn : {1.0, -1.0}) buckets_[cell_key(sgn * cover_.centers[c].vec())].push_back(c);
  }

  double step() const { return r_ / 2.0; }

  // Calls fn(cap, wedge) for every cap center c with |u ^ c| <= r.
  template <class Fn>
  void caps_near(const Vec& u, Fn&& fn) const {
    auto test = [&](std::size_t c) {
      const double dot = u.dot(cover_.centers[c].vec());
      const double w = std::sqrt(std::max(0.0, 1.0 - dot * dot));
      if (w <= r_) fn(c, w);
    };
    if (all_) {
      for (std::size_t c = 0; c < cover_.centers.size(); ++c) test(c);
      return;
    }
    std::vector<std::size_t> seen;
    const auto base = cell_key(u);
    const int cells = static_cast<int>(std::pow(3, n_));
    for (int m = 0; m < cells; ++m) {
      int t = m;
      auto key = base;
      for (int a = 0; a < n_; ++a) {
        key[a] += t % 3 - 1;
        t /= 3;
      }
      auto it = buckets_.find(key);
      if (it == buckets_.end()) continue;
      for (auto c : it->second) seen.push_back(c);
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto c : seen) test(c);
  }

  const Eigen::MatrixXd& frame(std::size_t cap) const {
    auto& f = frames_[cap];
    if (f.size() == 0) {
      const Vec& c = cover_.centers[cap].vec();
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
      Eigen::MatrixXd q = qr.householderQ();
      f = q.rightCols(n_ - 1);  // columns span c-perp
    }
    return f;
  }

  const Vec& center(std::size_t cap) const { return cover_.centers[cap].vec(); }

  // Calls fn(key, distance) for every net center within r of the line (u, x).
  template <class Fn>
  void centers_near(const Vec& u, const Vec& x, Fn&& fn) const {
    const double h = step();
    const double reach = 1.0 + r_;
    caps_near(u, [&](std::size_t cap, double w) {
      const double a = x.dot(center(cap));
      const double budget = r_ - w;
      const double rad2 = budget * budget - a * a;
      if (rad2 < 0.0) return;
      const double rad = std::sqrt(rad2);
      const Vec y = frame(cap).transpose() * x;
      const int m = n_ - 1;
      std::array<std::int32_t, kMaxDim - 1> lo{}, hi{}, g{};
      for (int i = 0; i < m; ++i) {
        lo[i] = static_cast<std::int32_t>(std::ceil((y[i] - rad) / h));
        hi[i] = static_cast<std::int32_t>(std::floor((y[i] + rad) / h));
        if (lo[i] > hi[i]) return;
        g[i] = lo[i];
      }
      while (true) {
        double d2 = a * a, g2 = 0.0;
        for (int i = 0; i < m; ++i) {
          const double t = y[i] - g[i] * h;
          d2 += t * t;
          g2 += (g[i] * h) * (g[i] * h);
        }
        const double dist = std::sqrt(d2) + w;
        if (dist <= r_ * (1 + 1e-12) && g2 <= reach * reach) {
          CenterKey key{static_cast<std::uint32_t>(cap), {}};
          for (int i = 0; i < m; ++i) key.g[i] = g[i];
          fn(key, dist);
        }
        int i = 0;
        for (; i < m; ++i) {
          if (++g[i] <= hi[i]) break;
          g[i] = lo[i];
        }
        if (i == m) break;
      }
    });
  }

 private:
  std::array<std::int64_t, kMaxDim> cell_key(const Vec& v) const {
    std::array<std::int64_t, kMaxDim> k{};
    for (int a = 0; a < n_; ++a) k[a] = static_cast<std::int64_t>(std::floor(v[a] / cell_));
    return k;
  }

  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, kMaxDim>& k) const {
      std::uint64_t h = 0;
      for (auto v : k) h = mix_seed(h ^ static_cast<std::uint64_t>(v));
      return static_cast<std::size_t>(h);
    }
  };

  int n_;
  double r_;
  CapCover cover_;
  bool all_ = false;
  double cell_ = 1.0;
  std::unordered_map<std::array<std::int64_t, kMaxDim>, std::vector<std::size_t>, KeyHash> buckets_;
  mutable std::vector<Eigen::MatrixXd> frames_;
};

class ProductScaleCache {
 public:
  ProductScaleCache(int n, std::vector<double> radii) : n_(n), radii_(std::move(radii)), scales_(radii_.size()) {}

  const ProductScale& at(std::size_t k) const {
    std::lock_guard lock(mutex_);
    if (!scales_[k]) scales_[k] = std::make_unique<ProductScale>(n_, radii_[k]);
    return *scales_[k];
  }

 private:
  int n_;
  std::vector<double> radii_;
  mutable std::mutex mutex_;
  mutable std::vector<std::unique_ptr<ProductScale>> scales_;
};

}  // namespace detail

namespace {

using detail::CenterKey;
using detail::CenterHash;

BallMasses product_masses(std::span<const Line> lines, std::span<const double> weights, const BallNet& net) {
  const std::size_t R = net.radii().size();
  BallMasses out{net.radii(), std::vector<double>(R, 0.0), std::vector<std::size_t>(R, 0)};
  for (std::size_t k = 0; k < R; ++k) {
    const auto& scale = net.scales().at(k);
    std::unordered_map<CenterKey, std::pair<double, std::size_t>, CenterHash> mass;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const double wi = weights.empty() ? 1.0 : weights[i];
      scale.centers_near(lines[i].direction().vec(), lines[i].foot(), [&](const CenterKey& key, double) {
        auto [it, fresh] = mass.try_emplace(key, 0.0, i);
        it->second.first += wi;
      });
    }
    // deterministic argmax: ties go to the smallest witness line
    for (const auto& [key, v] : mass) {
      if (v.first > out.worst[k] || (v.first == out.worst[k] && v.second < out.worst_line[k])) {
        out.worst[k] = v.first;
        out.worst_line[k] = v.second;
      }
    }
  }
  return out;
}

}  // namespace

// -- WeightedLineSet -------------------------------------------------------------

WeightedLineSet::WeightedLineSet(std::vector<Line> lines_, std::vector<double> weights_, double s0_, double eps_)
    : lines(std::move(lines_)), weights(std::move(weights_)), s0(s0_), eps(eps_) {
  if (lines.size() != weights.size()) throw DomainError("weights and lines differ in length");
  if (lines.empty()) throw DomainError("weighted line set is empty");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > Tolerances::weight_sum)
    throw DomainError(fmt::format("weights sum to {}, expected 1", sum));
  if (!(s0 >= 0.0) || !(eps >= 0.0)) throw DomainError("exponents must be nonnegative");
}

WeightedLineSet WeightedLineSet::uniform(std::vector<Line> lines, double s0, double eps) {
  if (lines.empty()) throw DomainError("weighted line set is empty");
  std::vector<double> w(lines.size(), 1.0 / static_cast<double>(lines.size()));
  return WeightedLineSet(std::move(lines), std::move(w), s0, eps);
}

// -- BallNet ------------------------------------------------------------------------

BallNet::BallNet(Kind kind, int n, double delta) : kind_(kind), n_(n), delta_(delta), radii_(dyadic_radii(delta)) {
  if (n < 2 || n > kMaxDim) throw DomainError(fmt::format("ball nets support 2 <= n <= {}, got {}", kMaxDim, n));
  // caps meeting a 2r-window of directions times lattice points in a ball of radius r at spacing r/2
  std::size_t lattice = 1;
  for (int i = 0; i < n - 1; ++i) lattice *= 5;
  overlap_bound_ = kind == Kind::product ? static_cast<std::size_t>(cap_overlap_bound(n)) * lattice : 0;
  scales_ = std::make_shared<detail::ProductScaleCache>(n, radii_);
}

BallNet BallNet::product(int n, double delta) { return BallNet(Kind::product, n, delta); }
BallNet BallNet::enclosing(int n, double delta) { return BallNet(Kind::enclosing, n, delta); }

double BallNet::covering_distance(const Line& l, std::size_t i) const {
  if (l.dim() != n_) throw DomainError("line dimension differs from the net");
  if (i >= radii_.size()) throw DomainError("radius index out of range");
  const auto& scale = scales_->at(i);
  double best = std::numeric_limits<double>::infinity();
  scale.centers_near(l.direction().vec(), l.foot(), [&](const CenterKey&, double d) { best = std::min(best, d); });
  return best;
}

// -- ball scans --------------------------------------------------------------------------

BallMasses ball_masses(std::span<const Line> lines, std::span<const double> weights, const BallNet& net) {
  if (!weights.empty() && weights.size() != lines.size()) throw DomainError("weights and lines differ in length");
  for (const auto& l : lines)
    if (l.dim() != net.n()) throw DomainError("line dimension differs from the net");
  if (lines.empty()) {
    const std::size_t R = net.radii().size();
    return {net.radii(), std::vector<double>(R, 0.0), std::vector<std::size_t>(R, 0)};
  }
  return net.kind() == BallNet::Kind::enclosing ? enclosing_masses(lines, weights, net)
                                                : product_masses(lines, weights, net);
}

BallCondition ball_condition(std::span<const Line> lines, double delta, double s, const BallNet& net) {
  const BallMasses m = ball_masses(lines, {}, net);
  BallCondition out;
  for (std::size_t k = 0; k < m.radii.size(); ++k) {
    const double ratio = m.worst[k] / std::pow(m.radii[k] / delta, s);
    if (ratio > out.worst_ratio) out = {ratio, m.radii[k], m.worst[k], m.worst_line[k]};
  }
  return out;
}

double ball_condition_worst_ratio(const TubeFamily& f, const BallNet& net) {
  if (f.empty()) throw DomainError("ball condition of an empty family");
  if (std::abs(net.delta() - f.delta()) > 1e-12 * f.delta())
    throw DomainError("net scale differs from the tube radius");
  std::vector<Line> lines;
  lines.reserve(f.size());
  for (const auto& t : f.tubes()) lines.push_back(line_of_tube(t));
  return ball_condition(lines, f.delta(), f.params().concentration_exponent(), net).worst_ratio;
}

double frostman_constant(WeightedLineSet& w, double s, const BallNet& net) {
  const BallMasses m = ball_masses(w.lines, w.weights, net);
  double c = 0.0;
  for (std::size_t k = 0; k < m.radii.size(); ++k) c = std::max(c, m.worst[k] / std::pow(m.radii[k], s));
  w.C0 = c;
  return c;
}

std::vector<std::size_t> separated_subset(std::span<const Line> lines, double sep) {
  const Packed p(lines);
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    bool ok = true;
    for (auto j : kept)
      if (p.dist(i, j) < sep) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(i);
  }
  return kept;
}

PigeonholeResult dyadic_pigeonhole(const WeightedLineSet& w, double delta) {
  if (!(delta > 0.0) || delta >= 1.0) throw DomainError("pigeonhole scale must lie in (0, 1)");
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < w.lines.size(); ++i)
    if (w.weights[i] > 0.0) support.push_back(i);
  if (support.empty()) throw DomainError("all weights vanish");

  std::vector<Line> sl;
  for (auto i : support) sl.push_back(w.lines[i]);
  std::vector<std::size_t> sep;
  for (auto i : separated_subset(sl, 2.0 * delta)) sep.push_back(support[i]);

  const Packed p(w.lines);
  const double base = std::pow(delta, w.s0);
  std::map<int, std::vector<std::size_t>> buckets;
  std::vector<double> mass(w.lines.size(), 0.0);
  double total = 0.0;
  for (auto i : sep) {
    double m = 0.0;
    for (auto j : support)
      if (p.dist(i, j) <= delta * (1 + 1e-12)) m += w.weights[j];
    mass[i] = m;
    total += m;
    buckets[static_cast<int>(std::floor(std::log2(m / base)))].push_back(i);
  }

  // level of band j is its lower mass 2^j delta^{s0}; j increasing means A = 2^{-j} decreasing
  PigeonholeResult out;
  double best = -1.0;
  for (const auto& [j, members] : buckets) {
    const double score = static_cast<double>(members.size()) * std::ldexp(base, j);
    if (score > best * (1 + 1e-12)) {
      best = score;
      out.bucket = j;
      out.selected = members;
    }
  }
  out.A = std::ldexp(1.0, -out.bucket);
  for (auto i : out.selected) out.masses.push_back(mass[i]);
  out.separated = sep.size();
  out.captured_mass = total;
  const double loglog = std::log(std::max(std::log(1.0 / delta), std::exp(1.0)));
  out.log_power = std::max(0.0, std::log(total / best) / loglog);
  out.frostman_lower_bound = std::isnan(w.C0) || out.A >= std::pow(delta, w.eps) / w.C0 * (1 - 1e-12);
  return out;
}

ThinResult random_thin(std::span<const Line> l3, double A, double C0, double eps, double delta, double s0,
                       std::uint64_t seed, const BallNet& net, int max_attempts) {
  if (!(A > 0.0) || !(C0 > 0.0)) throw DomainError("A and C0 must be positive");
  if (max_attempts < 1) throw DomainError("at least one attempt is required");
  const double q = std::pow(delta, 2.0 * eps) / (C0 * A);
  if (q > 1.0 + 1e-12) throw DomainError(fmt::format("selection probability {} exceeds 1", q));
  const double need = 0.5 * q * static_cast<double>(l3.size());

  BallCondition worst;
  std::size_t best_size = 0;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng(mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(attempt))));
    std::vector<std::size_t> kept;
    std::vector<Line> sample;
    for (std::size_t i = 0; i < l3.size(); ++i)
      if (q >= 1.0 || rng.bernoulli(q)) {
        kept.push_back(i);
        sample.push_back(l3[i]);
      }
    best_size = std::max(best_size, kept.size());
    if (static_cast<double>(kept.size()) < need * (1 - 1e-12)) continue;
    BallCondition bc = ball_condition(sample, delta, s0, net);
    if (bc.worst_ratio <= 1.0 + 1e-12) {
      ThinResult out;
      out.kept = std::move(kept);
      out.probability = q;
      out.attempts = attempt + 1;
      out.worst_ratio = bc.worst_ratio;
      return out;
    }
    if (bc.worst_ratio > worst.worst_ratio) {
      bc.line = kept[bc.line];
      worst = bc;
    }
  }
  throw ThinningFailure(fmt::format("random_thin: {} attempts failed; worst ball r = {} holds {} lines (ratio {:.3g}), "
                                    "largest sample {} vs required {:.1f}",
                                    max_attempts, worst.radius, worst.count, worst.worst_ratio, best_size, need),
                        worst, best_size);
}

}  // namespace tubelab
