#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "imasp/field_model.hpp"
#include "imasp/planning.hpp"

namespace imasp {

/// Unobserved cells of `domain` in row-major order.
inline std::vector<Cell> unobserved_cells(const PosteriorData& d, const GridDomain& domain) {
  std::vector<bool> seen(static_cast<std::size_t>(domain.size()), false);
  for (const auto& c : d.locations()) seen[static_cast<std::size_t>(domain.index(c))] = true;
  std::vector<Cell> out;
  for (int i = 0; i < domain.size(); ++i) {
    if (!seen[static_cast<std::size_t>(i)]) out.push_back(domain.cell(i));
  }
  return out;
}

/// Posterior map entropy: joint LGP entropy of every unobserved cell.
inline double ent_metric(const PosteriorData& d, const GridDomain& domain, const Hyperparams& h) {
  const auto targets = unobserved_cells(d, domain);
  if (targets.empty()) throw InvalidArgument("map entropy needs an unobserved cell");
  return lgp_entropy(d, targets, h);
}

/// |y_x - prediction_x| / mean(y) for every cell, row-major.
inline std::vector<double> relative_errors(const FieldMap& field, std::span<const double> predictions) {
  if (static_cast<int>(predictions.size()) != field.domain().size()) {
    throw InvalidArgument("one prediction per cell required");
  }
  const double scale = field.mean();
  std::vector<double> out(predictions.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(field.values()[i] - predictions[i]) / scale;
  return out;
}

inline double mean_squared(std::span<const double> e) {
  double s = 0.0;
  for (double v : e) s += v * v;
  return s / static_cast<double>(e.size());
}

/// Lognormal posterior mean of every cell, row-major.
inline std::vector<double> lognormal_predictions(const PosteriorData& d, const GridDomain& domain,
                                                 const Hyperparams& h) {
  const auto cells = domain.cells();
  const auto g = posterior(d, cells, h);
  std::vector<double> out(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out[i] = std::exp(g.mean(ii) + 0.5 * g.covariance(ii, ii));
  }
  return out;
}

/// |y_x - E[Y_x | d]| / mean(y) for every cell.
inline std::vector<double> error_map(const PosteriorData& d, const FieldMap& field,
                                     const Hyperparams& h) {
  return relative_errors(field, lognormal_predictions(d, field.domain(), h));
}

/// Mean squared relative error of the lognormal predictor over all cells.
inline double err_metric(const PosteriorData& d, const FieldMap& field, const Hyperparams& h) {
  return mean_squared(error_map(d, field, h));
}

struct RolloutResult {
  PosteriorData final_data;
  std::vector<std::vector<Cell>> path_cells;  // per robot, excluding the start
  std::vector<ConstrainedJointAction> actions;
  std::vector<double> rewards;  // realized stagewise rewards under the context's model
  double ent = 0.0;
  double err = 0.0;
  double wall_time = 0.0;  // seconds spent in planning calls
  bool dead_end = false;
};

/// Executes `policy` for stages 0..ctx.horizon against `field`, revealing
/// log y after each move. Non-adaptive policies plan once from d0.
inline RolloutResult rollout(Policy& policy, const FieldMap& field, const PosteriorData& d0,
                             const TeamState& s0, const PlanningContext& ctx) {
  using clock = std::chrono::steady_clock;
  RolloutResult out;
  out.path_cells.resize(static_cast<std::size_t>(s0.team_size()));
  PosteriorData d = d0;
  TeamState s = s0;
  auto cond = ctx.conditioner(d0);

  auto apply = [&](const ConstrainedJointAction& a) {
    const Cell c = target_cell(s, a);
    const auto cand = cond.prepare(c);
    out.rewards.push_back(candidate_reward(cand, ctx.model));
    const double z = field.log_at(c);
    s = transition(s, a, ctx.domain);
    cond.push(cand, z);
    d = d.observe(c, z);
    out.actions.push_back(a);
    out.path_cells[static_cast<std::size_t>(a.robot_index)].push_back(c);
  };

  if (policy.adaptive()) {
    for (int stage = 0; stage <= ctx.horizon; ++stage) {
      if (constrained_actions(s, ctx.domain).empty()) {
        out.dead_end = true;
        break;
      }
      ConstrainedJointAction a;
      const auto t0 = clock::now();
      try {
        a = policy.act(s, d, stage);
      } catch (const DeadEnd&) {
        out.wall_time += std::chrono::duration<double>(clock::now() - t0).count();
        out.dead_end = true;
        break;
      }
      out.wall_time += std::chrono::duration<double>(clock::now() - t0).count();
      apply(a);
    }
  } else {
    const auto t0 = clock::now();
    std::vector<ConstrainedJointAction> plan;
    try {
      plan = policy.plan(s0, d0);
    } catch (const DeadEnd&) {
      out.dead_end = true;
    }
    out.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
    for (std::size_t i = 0; i < plan.size() && static_cast<int>(i) <= ctx.horizon; ++i) apply(plan[i]);
    if (static_cast<int>(plan.size()) < ctx.horizon + 1) out.dead_end = true;
  }

  out.final_data = d;
  out.ent = ent_metric(d, ctx.domain, ctx.hyper);
  out.err = err_metric(d, field, ctx.hyper);
  return out;
}

struct TTestResult {
  double statistic = 0.0;
  bool significant = false;
  double critical = 0.0;
  double mean_difference = 0.0;
  int degrees_of_freedom = 0;
};

/// Paired two-sided t-test on a[i] - b[i].
inline TTestResult paired_ttest(std::span<const double> a, std::span<const double> b,
                                double alpha) {
  if (a.size() != b.size()) throw InvalidArgument("paired samples differ in length");
  if (a.size() < 5) throw InsufficientData("paired t-test needs at least 5 pairs");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("significance level outside (0, 1)");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dev = a[i] - b[i] - mean;
    ss += dev * dev;
  }
  const double sd = std::sqrt(ss / (n - 1.0));

  TTestResult r;
  r.mean_difference = mean;
  r.degrees_of_freedom = static_cast<int>(a.size()) - 1;
  const boost::math::students_t dist(n - 1.0);
  r.critical = boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
  if (sd == 0.0) {
    r.statistic = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
  } else {
    r.statistic = mean / (sd / std::sqrt(n));
  }
  r.significant = std::abs(r.statistic) > r.critical;
  return r;
}

}  // namespace imasp
