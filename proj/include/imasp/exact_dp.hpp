#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "imasp/outcome_discretization.hpp"
#include "imasp/planning.hpp"

namespace imasp {

/// Integration settings of the exact recursion. The outcome integral runs
/// over [-half_width, half_width] standard deviations of the untruncated
/// Gaussian; the integrand max_a Q_a(u) is split at every change of the
/// maximizing action and each smooth piece gets a fixed 31-point
/// Gauss-Kronrod rule. Pieces whose error estimate exceeds `tolerance` are
/// bisected at most `max_depth` times; a fixed rule keeps nested levels
/// smooth in the outer variable.
struct ExactQuadrature {
  int grid_cells = 24;
  double half_width = 9.0;
  double tolerance = 1e-12;
  unsigned max_depth = 4;
};

/// E[max_i (intercepts[i] + slopes[i] * U)] for U ~ N(0, 1), evaluated in
/// closed form over the pieces of the upper envelope.
inline double expected_max_affine(std::span<const double> intercepts,
                                  std::span<const double> slopes) {
  const std::size_t m = intercepts.size();
  if (m == 0) return 0.0;
  std::vector<double> breaks;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (slopes[i] != slopes[j]) {
        const double u = (intercepts[j] - intercepts[i]) / (slopes[i] - slopes[j]);
        // Crossings far in the tails carry no mass; keeping them would put
        // the tail probes where rounding hides which line is on top.
        if (std::abs(u) <= 40.0) breaks.push_back(u);
      }
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  const double inf = std::numeric_limits<double>::infinity();
  auto piece = [&](double lo, double hi) {
    double probe = 0.0;
    if (std::isinf(lo) && std::isinf(hi)) probe = 0.0;
    else if (std::isinf(lo)) probe = hi - 1.0;
    else if (std::isinf(hi)) probe = lo + 1.0;
    else probe = 0.5 * (lo + hi);
    std::size_t best = 0;
    for (std::size_t i = 1; i < m; ++i) {
      if (intercepts[i] + slopes[i] * probe > intercepts[best] + slopes[best] * probe) best = i;
    }
    const double mass = stdnormal::interval_probability(lo, hi);
    const double plo = std::isinf(lo) ? 0.0 : stdnormal::pdf(lo);
    const double phi = std::isinf(hi) ? 0.0 : stdnormal::pdf(hi);
    return intercepts[best] * mass + slopes[best] * (plo - phi);
  };

  double total = 0.0;
  double lo = -inf;
  for (double b : breaks) {
    total += piece(lo, b);
    lo = b;
  }
  total += piece(lo, inf);
  return total;
}

namespace detail {

/// Strictly adaptive recursion with the exact Gaussian expectation.
class ExactRecursion {
 public:
  ExactRecursion(const PlanningContext& ctx, const ExactQuadrature& quad) : ctx_(ctx), quad_(quad) {}

  double value(const TeamState& s, Conditioner& cond, int stage) const {
    const auto actions = constrained_actions(s, ctx_.domain);
    double best = actions.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
    for (const auto& a : actions) best = std::max(best, action_value(s, cond, stage, a));
    return best;
  }

  double action_value(const TeamState& s, Conditioner& cond, int stage,
                      const ConstrainedJointAction& a) const {
    const auto cand = cond.prepare(target_cell(s, a));
    const double reward = candidate_reward(cand, ctx_.model);
    if (stage >= ctx_.horizon) return reward;
    return reward + expectation(transition(s, a, ctx_.domain), cond, cand, stage + 1);
  }

 private:
  double expectation(const TeamState& next, Conditioner& cond, const Conditioner::Candidate& cand,
                     int stage) const {
    const auto actions = constrained_actions(next, ctx_.domain);
    if (actions.empty()) return 0.0;
    const double mu = cand.mean;
    const double sd = std::sqrt(cand.variance);

    if (stage >= ctx_.horizon) {
      // Last-stage rewards are affine in the revealed value.
      std::vector<double> intercepts;
      std::vector<double> slopes;
      cond.push(cand, mu);
      for (const auto& b : actions) {
        const auto cb = cond.prepare(target_cell(next, b));
        intercepts.push_back(candidate_reward(cb, ctx_.model));
        slopes.push_back(ctx_.model == Model::LGP ? cond.last_value_sensitivity(cb) * sd : 0.0);
      }
      cond.pop();
      return expected_max_affine(intercepts, slopes);
    }

    auto q = [&](std::size_t b, double u) {
      cond.push(cand, mu + sd * u);
      const double v = action_value(next, cond, stage, actions[b]);
      cond.pop();
      return v;
    };
    auto q_all = [&](double u) {
      std::vector<double> out(actions.size());
      cond.push(cand, mu + sd * u);
      for (std::size_t b = 0; b < actions.size(); ++b) {
        out[b] = action_value(next, cond, stage, actions[b]);
      }
      cond.pop();
      return out;
    };

    struct Segment {
      double lo;
      double hi;
      std::size_t active;
    };
    std::vector<Segment> segments;

    auto split = [&](auto&& self, double lo, std::size_t a, double hi, std::size_t b,
                     int depth) -> void {
      if (a == b) {
        segments.push_back({lo, hi, a});
        return;
      }
      auto g = [&](double u) { return q(a, u) - q(b, u); };
      const double glo = g(lo);
      const double ghi = g(hi);
      double root = 0.5 * (lo + hi);
      if (glo <= 0.0) {
        root = lo;
      } else if (ghi >= 0.0) {
        root = hi;
      } else {
        std::uintmax_t iters = 100;
        const auto r = boost::math::tools::toms748_solve(
            g, lo, hi, glo, ghi, boost::math::tools::eps_tolerance<double>(52), iters);
        root = 0.5 * (r.first + r.second);
      }
      if (depth < 6 && root > lo && root < hi) {
        const auto at = q_all(root);
        const std::size_t c = argmax_first(at);
        const double scale = 1e-12 * (1.0 + std::abs(at[c]));
        if (c != a && c != b && at[c] > std::max(at[a], at[b]) + scale) {
          self(self, lo, a, root, c, depth + 1);
          self(self, root, c, hi, b, depth + 1);
          return;
        }
      }
      if (root > lo) segments.push_back({lo, root, a});
      if (root < hi) segments.push_back({root, hi, b});
    };

    const int cells = quad_.grid_cells;
    std::vector<double> grid(static_cast<std::size_t>(cells) + 1);
    std::vector<std::size_t> best(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      grid[k] = -quad_.half_width + 2.0 * quad_.half_width * static_cast<double>(k) / cells;
      best[k] = actions.size() == 1 ? 0 : argmax_first(q_all(grid[k]));
    }
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      split(split, grid[k], best[k], grid[k + 1], best[k + 1], 0);
    }

    double total = 0.0;
    for (const auto& seg : segments) {
      auto f = [&](double u) { return q(seg.active, u) * stdnormal::pdf(u); };
      total += integrate(f, seg.lo, seg.hi, 0);
    }
    return total;
  }

  template <class F>
  double integrate(F& f, double lo, double hi, unsigned depth) const {
    double error = 0.0;
    const double v =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 0, 0.0, &error);
    if (error <= quad_.tolerance || depth >= quad_.max_depth) return v;
    const double mid = 0.5 * (lo + hi);
    return integrate(f, lo, mid, depth + 1) + integrate(f, mid, hi, depth + 1);
  }

  const PlanningContext& ctx_;
  ExactQuadrature quad_;
};

}  // namespace detail

/// Exact value of the strictly adaptive problem from (d, s) at `stage`;
/// only tractable on tiny instances.
inline double exact_value(const PlanningContext& ctx, const PosteriorData& d, const TeamState& s,
                          int stage, const ExactQuadrature& quad = {}) {
  if (ctx.horizon - stage > 4 || ctx.domain.size() > 16) {
    throw InstanceTooLarge("exact DP is limited to t <= 4 on at most 16 cells");
  }
  auto cond = ctx.conditioner(d);
  return detail::ExactRecursion(ctx, quad).value(s, cond, stage);
}

inline double exact_dp(const PlanningContext& ctx, const PosteriorData& d0, const TeamState& s0,
                       const ExactQuadrature& quad = {}) {
  return exact_value(ctx, d0, s0, 0, quad);
}

}  // namespace imasp
