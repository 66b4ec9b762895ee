#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "hmpdrl/features.hpp"
#include "hmpdrl/grid.hpp"
#include "hmpdrl/neural.hpp"
#include "hmpdrl/orca.hpp"
#include "hmpdrl/planner.hpp"
#include "hmpdrl/rng.hpp"

namespace hmpdrl::test {

inline OccupancyGrid random_grid(int w, int h, double density, std::uint64_t seed, double res = 0.1) {
  Rng rng(seed);
  std::bernoulli_distribution occ(density);
  OccupancyGrid g(w, h, res);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) g.set(x, y, occ(rng));
  return g;
}

/// Brute-force square dilation: a cell is occupied when any occupied cell
/// lies within Chebyshev distance r.
inline OccupancyGrid brute_dilate(const OccupancyGrid& g, int r) {
  OccupancyGrid out(g.width(), g.height(), g.resolution(), g.origin());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      bool hit = false;
      for (int dy = -r; dy <= r && !hit; ++dy)
        for (int dx = -r; dx <= r && !hit; ++dx)
          hit = g.in_bounds(x + dx, y + dy) && g.occupied(x + dx, y + dy);
      out.set(x, y, hit);
    }
  return out;
}

/// Exact path cost as (orthogonal, diagonal) move counts; the real cost is
/// o + d * sqrt2 and distinct pairs never tie.
struct MoveCount {
  int o = 0, d = 0;
  double cost() const { return o + d * std::numbers::sqrt2; }
};

/// Plain Dijkstra on the 8-connected grid with no corner cutting. Returns
/// the optimal move count, or o = -1 when unreachable.
inline MoveCount dijkstra(const OccupancyGrid& g, Cell s, Cell t) {
  const int w = g.width(), h = g.height();
  std::vector<double> dist(static_cast<std::size_t>(w * h), std::numeric_limits<double>::infinity());
  std::vector<MoveCount> count(dist.size());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  const int si = s.y * w + s.x, ti = t.y * w + t.x;
  dist[static_cast<std::size_t>(si)] = 0.0;
  pq.push({0.0, si});
  while (!pq.empty()) {
    auto [d, i] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(i)]) continue;
    if (i == ti) return count[static_cast<std::size_t>(i)];
    const int x = i % w, y = i / w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h || g.occupied(nx, ny)) continue;
        if (dx && dy && (g.occupied(x + dx, y) || g.occupied(x, y + dy))) continue;
        MoveCount c = count[static_cast<std::size_t>(i)];
        (dx && dy ? c.d : c.o)++;
        const int j = ny * w + nx;
        if (c.cost() < dist[static_cast<std::size_t>(j)]) {
          dist[static_cast<std::size_t>(j)] = c.cost();
          count[static_cast<std::size_t>(j)] = c;
          pq.push({c.cost(), j});
        }
      }
  }
  return {-1, 0};
}

/// Random network input with `n` entity rows and K checkpoints.
inline StateInput random_state(Rng& rng, int n, int K = 2) {
  StateInput in;
  for (int i = 0; i < self_state_dim(K); ++i) in.self.push_back(uniform(rng, -2.0, 2.0));
  for (int i = 0; i < n; ++i) {
    EntityFeature f;
    for (auto& v : f.observable) v = uniform(rng, -3.0, 3.0);
    f.one_hot[static_cast<std::size_t>(uniform_int(rng, 0, 3))] = 1.0;
    append_row(in, f);
  }
  return in;
}

inline std::vector<const StateInput*> pointers(const std::vector<StateInput>& v) {
  std::vector<const StateInput*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

/// Five-point central difference; truncation error O(h^4).
template <typename F>
double numeric_derivative(F&& f, double h) {
  return (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h);
}

struct GradientCheck {
  double max_rel_error = 0.0;
  int checked = 0;
  int per_net[4] = {0, 0, 0, 0};
  int batch_norm_params = 0;  // gamma or beta entries among the checked
};

/// Compares analytic gradients of the MSE loss against finite differences
/// on `per_net` random parameters of each sub-network, half of them drawn
/// from batch-norm scales and shifts where a net has any.
/// Relative error is |a - n| / max(|a|, |n|, floor).
inline GradientCheck gradient_check(nn::ValueNet& net, const std::vector<StateInput>& states,
                                    const std::vector<double>& targets, int per_net, std::uint64_t seed,
                                    nn::Mode mode = nn::Mode::Train, double h = 3e-5, double floor = 1e-6) {
  const auto ptrs = pointers(states);
  auto grad = net.zero_grad();
  net.loss_and_grad(ptrs, targets, mode, &grad);
  GradientCheck res;
  Rng rng(seed);
  const nn::DenseNet::Grad* grads[4] = {&grad.embed, &grad.pairwise, &grad.attention, &grad.value};
  const auto nets = net.nets();
  for (int k = 0; k < 4; ++k) {
    auto params = nets[static_cast<std::size_t>(k)]->parameters();
    auto gspans = nn::DenseNet::gradients(const_cast<nn::DenseNet::Grad&>(*grads[k]));
    // spans alternate per layer: weight, then gamma and beta (hidden) or bias (output)
    std::vector<std::size_t> bn_spans, other_spans;
    std::size_t s = 0;
    for (const auto& layer : nets[static_cast<std::size_t>(k)]->layers()) {
      other_spans.push_back(s++);
      if (layer.batch_norm) {
        bn_spans.push_back(s++);
        bn_spans.push_back(s++);
      } else {
        other_spans.push_back(s++);
      }
    }
    for (int i = 0; i < per_net; ++i) {
      const bool bn = !bn_spans.empty() && i % 2 == 1;
      const auto& pool = bn ? bn_spans : other_spans;
      const std::size_t si = pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
      const std::size_t j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(params[si].size()) - 1));
      double& p = params[si][j];
      const double orig = p;
      const double numeric = numeric_derivative(
          [&](double d) {
            p = orig + d;
            return net.loss(ptrs, targets, mode);
          },
          h);
      p = orig;
      const double analytic = gspans[si][j];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      res.max_rel_error = std::max(res.max_rel_error, rel);
      ++res.checked;
      ++res.per_net[k];
      res.batch_norm_params += bn;
    }
  }
  return res;
}

inline std::pair<Cell, Cell> random_endpoints(const OccupancyGrid& g, Rng& rng) {
  auto pick = [&] {
    for (;;) {
      const Cell c{uniform_int(rng, 0, g.width() - 1), uniform_int(rng, 0, g.height() - 1)};
      if (!g.occupied(c)) return c;
    }
  };
  return {pick(), pick()};
}


/// Arc length along `poly` of the first segment point equal to c; -1 when
/// c is not on the polyline.
inline double arclen_of(const std::vector<Vec2>& poly, Vec2 c) {
  double acc = 0.0;
  for (std::size_t i = 1; i < poly.size(); ++i) {
    const Vec2 a = poly[i - 1], b = poly[i];
    const double len = distance(a, b);
    const double u = len > 0 ? (c - a).dot(b - a) / (len * len) : 0.0;
    if (u >= -1e-9 && u <= 1 + 1e-9 && distance(a + (b - a) * u, c) < 1e-9) return acc + u * len;
    acc += len;
  }
  return -1.0;
}


inline JointState random_joint(Rng& rng, int n) {
  JointState j;
  j.robot.position = {uniform(rng, -10, 10), uniform(rng, -10, 10)};
  j.robot.goal = {uniform(rng, -10, 10), uniform(rng, -10, 10)};
  j.robot.velocity = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
  j.robot.theta = uniform(rng, -3.1, 3.1);
  for (int i = 0; i < n; ++i) {
    EntityState e;
    e.position = {uniform(rng, -10, 10), uniform(rng, -10, 10)};
    e.velocity = {uniform(rng, -2, 2), uniform(rng, -2, 2)};
    e.radius = uniform(rng, 0.1, 0.5);
    e.type = static_cast<EntityType>(uniform_int(rng, 0, 3));
    j.entities.push_back(e);
  }
  return j;
}


struct Scene {
  Vec2 pos, vel, preferred;
  double radius, max_speed;
  std::vector<orca::Neighbor> neighbors;
};

inline Scene random_scene(Rng& rng) {
  Scene s;
  s.pos = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
  s.vel = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
  s.radius = uniform(rng, 0.15, 0.5);
  s.max_speed = uniform(rng, 0.5, 2.0);
  s.preferred = {uniform(rng, -2.5, 2.5), uniform(rng, -2.5, 2.5)};
  const int n = uniform_int(rng, 1, 5);
  for (int i = 0; i < n; ++i) {
    orca::Neighbor nb;
    const double ang = uniform(rng, 0, 2 * std::numbers::pi);
    const double r = uniform(rng, 0.3, 4.0);
    nb.position = s.pos + Vec2(std::cos(ang), std::sin(ang)) * r;
    nb.velocity = {uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5)};
    nb.radius = uniform(rng, 0.1, 0.5);
    nb.responsibility = uniform_int(rng, 0, 1) ? 0.5 : 1.0;
    s.neighbors.push_back(nb);
  }
  return s;
}

inline double max_violation(const std::vector<orca::Line>& lines, Vec2 v) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& l : lines) m = std::max(m, orca::violation(l, v));
  return m;
}

/// Grid-search oracle for one solved scene. For a feasible solution, `gap`
/// is how much closer to the preferred velocity the best admissible grid
/// velocity gets (positive: the solver lost). For an infeasible one it is
/// the solver's max violation minus the best grid max violation.
struct OrcaCheck {
  bool feasible = false;
  double violation = 0.0;  // solver's max constraint violation
  double gap = 0.0;
};

inline OrcaCheck orca_grid_check(const Scene& s, const orca::Solution& sol, double step = 0.01) {
  OrcaCheck c;
  c.feasible = sol.feasible;
  c.violation = max_violation(sol.lines, sol.velocity);
  const int n = static_cast<int>(std::ceil(s.max_speed / step));
  const double best = (sol.velocity - s.preferred).norm();
  double grid_best = std::numeric_limits<double>::infinity();
  for (int ix = -n; ix <= n; ++ix)
    for (int iy = -n; iy <= n; ++iy) {
      const Vec2 v{ix * step, iy * step};
      if (v.norm() > s.max_speed) continue;
      if (sol.feasible) {
        if (max_violation(sol.lines, v) <= 0.0) grid_best = std::min(grid_best, (v - s.preferred).norm());
      } else {
        grid_best = std::min(grid_best, max_violation(sol.lines, v));
      }
    }
  c.gap = sol.feasible ? best - grid_best : c.violation - grid_best;
  return c;
}

inline std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("hmpdrl_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace hmpdrl::test
