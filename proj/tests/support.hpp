#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iterator>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "imasp/imasp.hpp"

namespace imasp::testing {

/// A small planning problem with its ground truth.
struct Tiny {
  PlanningContext ctx;
  PosteriorData d;
  TeamState s;
  FieldMap field;
};

/// Mean in [-0.5, 0.5), signal variance in [0.5, 2), length scale in [0.8, 2.5).
inline Hyperparams random_hyper(std::mt19937_64& rng, double noise_variance) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double mean = u(rng) - 0.5;
  const double sv = 0.5 + 1.5 * u(rng);
  const double ls = 0.8 + 1.7 * u(rng);
  return {mean, sv, ls, noise_variance};
}

/// One robot starting at (0, 0) plus `prior` random observed cells; the
/// budget allows exactly horizon + 1 moves.
inline Tiny tiny_instance(std::mt19937_64& rng, const Hyperparams& h, std::uint64_t field_seed,
                          Model model, int rows, int cols, int horizon, int prior) {
  const GridDomain dom(rows, cols);
  auto field = sample_field(h, dom, field_seed);
  const auto cells = dom.cells();
  std::vector<Cell> locs;
  std::sample(cells.begin(), cells.end(), std::back_inserter(locs), prior, rng);
  const Cell start{0, 0};
  if (std::find(locs.begin(), locs.end(), start) == locs.end()) locs.push_back(start);
  std::vector<double> vals;
  for (const auto& c : locs) vals.push_back(field.log_at(c));
  const Cell starts[] = {start};
  auto s = TeamState::facing_interior(dom, starts, locs, horizon + 1);
  return {PlanningContext(dom, h, model, horizon), PosteriorData(locs, vals), std::move(s),
          std::move(field)};
}

/// Every action sequence of the given length (or shorter, when all robots
/// are stuck) from `s`.
inline void enumerate_paths(const TeamState& s, const GridDomain& dom, int length,
                            std::vector<ConstrainedJointAction>& prefix,
                            std::vector<std::vector<ConstrainedJointAction>>& out) {
  const auto actions = constrained_actions(s, dom);
  if (static_cast<int>(prefix.size()) == length || actions.empty()) {
    out.push_back(prefix);
    return;
  }
  for (const auto& a : actions) {
    prefix.push_back(a);
    enumerate_paths(transition(s, a, dom), dom, length, prefix, out);
    prefix.pop_back();
  }
}

inline std::vector<std::vector<ConstrainedJointAction>> enumerate_paths(const TeamState& s,
                                                                         const GridDomain& dom,
                                                                         int length) {
  std::vector<std::vector<ConstrainedJointAction>> out;
  std::vector<ConstrainedJointAction> prefix;
  enumerate_paths(s, dom, length, prefix, out);
  return out;
}

inline std::vector<Cell> path_cells(const TeamState& s0, const std::vector<ConstrainedJointAction>& path,
                                    const GridDomain& dom) {
  std::vector<Cell> out;
  TeamState s = s0;
  for (const auto& a : path) {
    out.push_back(target_cell(s, a));
    s = transition(s, a, dom);
  }
  return out;
}

/// Joint entropy of the path measurements given d (log scale, GP).
inline double joint_gp_entropy(const PosteriorData& d, const std::vector<Cell>& cells,
                               const Hyperparams& h) {
  if (cells.empty()) return 0.0;
  return gaussian_entropy(posterior(d, cells, h));
}

/// Integral of phi(u) f(u) over [lo, hi] with a 20-point Gauss-Legendre rule
/// on each of `cells` equal pieces.
template <class F>
double normal_expectation(F&& f, double lo = -9.0, double hi = 9.0, int cells = 64) {
  double total = 0.0;
  const double w = (hi - lo) / cells;
  for (int i = 0; i < cells; ++i) {
    total += boost::math::quadrature::gauss<double, 20>::integrate(
        [&](double u) { return stdnormal::pdf(u) * f(u); }, lo + i * w, lo + (i + 1) * w);
  }
  return total;
}

/// Expected cumulative reward and expected terminal quantity of an adaptive
/// policy, integrating every revealed measurement against its exact
/// Gaussian predictive. Action switches of the policy are located by
/// bisection so that each quadrature piece sees a single action.
class PolicyQuadrature {
 public:
  using Terminal = std::function<double(const PosteriorData&)>;

  PolicyQuadrature(const PlanningContext& ctx, Policy& policy, Terminal terminal, int cells = 48)
      : ctx_(ctx), policy_(policy), terminal_(std::move(terminal)), cells_(cells) {}

  struct Value {
    double reward = 0.0;
    double terminal = 0.0;
  };

  Value evaluate(const PosteriorData& d, const TeamState& s, int stage) {
    if (stage > ctx_.horizon || constrained_actions(s, ctx_.domain).empty()) {
      return {0.0, terminal_ ? terminal_(d) : 0.0};
    }
    const auto a = policy_.act(s, d, stage);
    const Cell c = target_cell(s, a);
    const Cell targets[] = {c};
    const auto g = posterior(d, targets, ctx_.hyper);
    const double mu = g.mean(0);
    const double var = g.covariance(0, 0);
    const double reward = single_cell_reward(mu, var, ctx_.model);
    if (stage == ctx_.horizon && !terminal_) return {reward, 0.0};
    const TeamState next = transition(s, a, ctx_.domain);
    const double sd = std::sqrt(var);
    auto data_at = [&](double u) { return d.observe(c, mu + sd * u); };
    auto next_action = [&](double u) -> int {
      if (stage + 1 > ctx_.horizon) return -1;
      const auto acts = constrained_actions(next, ctx_.domain);
      if (acts.empty()) return -1;
      const auto b = policy_.act(next, data_at(u), stage + 1);
      return b.robot_index * 3 + static_cast<int>(b.move);
    };
    auto inner = [&](double u) { return evaluate(data_at(u), next, stage + 1); };

    Value out{reward, 0.0};
    const double lo = -9.0;
    const double w = 18.0 / cells_;
    for (int i = 0; i < cells_; ++i) {
      double a0 = lo + i * w;
      const double b0 = a0 + w;
      std::vector<double> cuts = {a0};
      int left = next_action(a0);
      double x = a0;
      // At most a few switches per piece; each is isolated by bisection.
      for (int guard = 0; guard < 8; ++guard) {
        if (next_action(b0) == left) break;
        double l = x;
        double r = b0;
        for (int it = 0; it < 60; ++it) {
          const double m = 0.5 * (l + r);
          (next_action(m) == left ? l : r) = m;
        }
        cuts.push_back(r);
        x = r;
        left = next_action(r);
      }
      cuts.push_back(b0);
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        if (!(cuts[k + 1] > cuts[k])) continue;
        gauss20(cuts[k], cuts[k + 1], [&](double u, double wt) {
          const auto v = inner(u);
          out.reward += wt * stdnormal::pdf(u) * v.reward;
          out.terminal += wt * stdnormal::pdf(u) * v.terminal;
        });
      }
    }
    return out;
  }

 private:
  template <class F>
  static void gauss20(double a, double b, F&& f) {
    using rule = boost::math::quadrature::gauss<double, 20>;
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const auto& x = rule::abscissa();
    const auto& w = rule::weights();
    for (std::size_t i = 0; i < x.size(); ++i) {
      f(mid + half * x[i], half * w[i]);
      f(mid - half * x[i], half * w[i]);
    }
  }

  const PlanningContext& ctx_;
  Policy& policy_;
  Terminal terminal_;
  int cells_;
};

}  // namespace imasp::testing
