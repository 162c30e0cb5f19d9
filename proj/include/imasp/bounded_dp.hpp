#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "imasp/outcome_discretization.hpp"
#include "imasp/planning.hpp"

namespace imasp {

namespace detail {

/// Exhaustive recursion of the strictly adaptive problem with the outcome
/// expectation replaced by the Jensen (lower) or Edmundson-Madansky (upper)
/// discretization.
class BoundedRecursion {
 public:
  BoundedRecursion(const PlanningContext& ctx, const StandardOutcomes& outcomes, BoundSide side)
      : ctx_(ctx),
        weights_(outcomes.weights(side == BoundSide::Upper)),
        offsets_(outcomes.offsets(side == BoundSide::Upper)) {}

  double value(const TeamState& s, Conditioner& cond, int stage) const {
    const auto actions = constrained_actions(s, ctx_.domain);
    if (actions.empty()) return 0.0;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& a : actions) best = std::max(best, action_value(s, cond, stage, a));
    return best;
  }

  double action_value(const TeamState& s, Conditioner& cond, int stage,
                      const ConstrainedJointAction& a) const {
    const auto cand = cond.prepare(target_cell(s, a));
    const double reward = candidate_reward(cand, ctx_.model);
    if (stage >= ctx_.horizon) return reward;
    const TeamState next = transition(s, a, ctx_.domain);
    const double sd = std::sqrt(cand.variance);
    double expected = 0.0;
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      cond.push(cand, cand.mean + sd * offsets_[j]);
      expected += weights_[j] * value(next, cond, stage + 1);
      cond.pop();
    }
    return reward + expected;
  }

  std::vector<double> action_values(const TeamState& s, Conditioner& cond, int stage,
                                    const std::vector<ConstrainedJointAction>& actions) const {
    std::vector<double> q;
    q.reserve(actions.size());
    for (const auto& a : actions) q.push_back(action_value(s, cond, stage, a));
    return q;
  }

 private:
  const PlanningContext& ctx_;
  const std::vector<double>& weights_;
  const std::vector<double>& offsets_;
};

inline void check_bounded_size(const PlanningContext& ctx, const TeamState& s, int stage,
                               int points) {
  const double branching = 3.0 * s.team_size();
  double leaves = branching;
  for (int i = stage; i < ctx.horizon; ++i) leaves *= branching * points;
  if (leaves > 5e7) throw InstanceTooLarge("bounded DP tree too large for exhaustive search");
}

}  // namespace detail

/// Greedy policy on the lower (Jensen) value function; recomputes the
/// remaining-horizon recursion from whatever data it is given.
class LowerBoundPolicy : public Policy {
 public:
  LowerBoundPolicy(PlanningContext ctx, int intervals, double truncation)
      : ctx_(std::move(ctx)), outcomes_(StandardOutcomes::make(intervals, truncation)) {}

  std::string name() const override { return "lower_bounded_dp"; }
  bool adaptive() const override { return true; }

  ConstrainedJointAction act(const TeamState& s, const PosteriorData& d, int stage) override {
    const auto actions = constrained_actions(s, ctx_.domain);
    if (actions.empty()) throw DeadEnd("no legal action");
    auto cond = ctx_.conditioner(d);
    detail::BoundedRecursion rec(ctx_, outcomes_, BoundSide::Lower);
    const auto q = rec.action_values(s, cond, stage, actions);
    return actions[argmax_first(q)];
  }

 private:
  PlanningContext ctx_;
  StandardOutcomes outcomes_;
};

struct BoundedDpResult {
  double value = 0.0;
  std::shared_ptr<Policy> policy;  // set for the lower side only
};

/// Value of the lower or upper approximate problem from (d, s) at `stage`.
inline double bounded_value(const PlanningContext& ctx, const PosteriorData& d,
                            const TeamState& s, int stage, const PlannerConfig& config,
                            BoundSide side) {
  const auto outcomes = StandardOutcomes::make(config.intervals, config.truncation);
  detail::check_bounded_size(ctx, s, stage,
                             side == BoundSide::Upper ? config.intervals + 1 : config.intervals);
  auto cond = ctx.conditioner(d);
  detail::BoundedRecursion rec(ctx, outcomes, side);
  return rec.value(s, cond, stage);
}

inline BoundedDpResult bounded_dp(const PlanningContext& ctx, const PosteriorData& d0,
                                  const TeamState& s0, const PlannerConfig& config,
                                  BoundSide side) {
  BoundedDpResult out;
  out.value = bounded_value(ctx, d0, s0, 0, config, side);
  if (side == BoundSide::Lower) {
    out.policy = std::make_shared<LowerBoundPolicy>(ctx, config.intervals, config.truncation);
  }
  return out;
}

}  // namespace imasp
