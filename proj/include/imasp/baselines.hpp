#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "imasp/planning.hpp"

namespace imasp {

using ActionSequence = std::vector<ConstrainedJointAction>;

struct MesResult {
  double value = 0.0;
  ActionSequence actions;  // robot 0's whole path first, then robot 1, ...
  bool optimal = false;    // false when the expansion budget cut the search
  long expansions = 0;
};

namespace detail {

/// Depth-first branch-and-bound over joint path sets. Paths are enumerated
/// robot by robot; a set is complete once it holds horizon + 1 cells or no
/// robot can move any more.
class MesSearch {
 public:
  MesSearch(const PlanningContext& ctx, const PosteriorData& d0, long max_expansions)
      : ctx_(ctx), cond_(ctx.conditioner(d0)), max_expansions_(max_expansions) {
    // Entropy of each cell given d0 alone caps every later reward there.
    for (const auto& c : ctx.domain.cells()) {
      if (d0.contains(c)) continue;
      const auto cand = cond_.prepare(c);
      cap_.push_back({std::max(0.0, candidate_reward(cand, ctx.model)), c});
    }
    std::stable_sort(cap_.begin(), cap_.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  }

  MesResult solve(const TeamState& s0) {
    best_.value = -std::numeric_limits<double>::infinity();
    ActionSequence seq;
    search(s0, 0, 0.0, seq);
    best_.optimal = !cut_;
    best_.expansions = expansions_;
    if (best_.value == -std::numeric_limits<double>::infinity()) best_.value = 0.0;
    return best_;
  }

 private:
  static constexpr double kTie = 1e-12;

  void offer(double value, const ActionSequence& seq) {
    if (value > best_.value + kTie || (value >= best_.value - kTie && seq < best_.actions)) {
      best_.value = value;
      best_.actions = seq;
    }
  }

  int remaining_budget(const TeamState& s, int robot) const {
    return s.budget() < 0 ? ctx_.horizon + 1 : s.budget() - s.pose(robot).steps;
  }

  double bound(const TeamState& s, int robot, int remaining) const {
    double total = 0.0;
    int taken = 0;
    for (const auto& [h, c] : cap_) {
      if (taken == remaining || h <= 0.0) break;
      if (s.visited(ctx_.domain, c)) continue;
      bool reachable = false;
      for (int r = robot; r < s.team_size() && !reachable; ++r) {
        reachable = manhattan_distance(s.pose(r).cell, c) <= std::min(remaining, remaining_budget(s, r));
      }
      if (!reachable) continue;
      total += h;
      ++taken;
    }
    return total;
  }

  void search(const TeamState& s, int robot, double value, ActionSequence& seq) {
    const int remaining = ctx_.horizon + 1 - static_cast<int>(seq.size());
    if (remaining == 0 || constrained_actions(s, ctx_.domain).empty()) {
      offer(value, seq);
      return;
    }
    if (robot >= s.team_size()) return;  // some robot could still move: set incomplete
    if (expansions_ >= max_expansions_) {
      cut_ = true;
      return;
    }
    if (value + bound(s, robot, remaining) < best_.value - kTie) return;
    ++expansions_;

    struct Child {
      Move move;
      double reward;
      Conditioner::Candidate cand;
    };
    std::vector<Child> children;
    for (Move m : kMoves) {
      if (!is_legal_move(s, robot, m, ctx_.domain)) continue;
      auto cand = cond_.prepare(target_cell(s, robot, m));
      const double r = candidate_reward(cand, ctx_.model);
      children.push_back({m, r, std::move(cand)});
    }
    // Best reward first so good incumbents appear early.
    std::stable_sort(children.begin(), children.end(),
                     [](const Child& a, const Child& b) { return a.reward > b.reward; });
    for (const auto& ch : children) {
      const ConstrainedJointAction a{robot, ch.move};
      cond_.push(ch.cand, ch.cand.mean);
      seq.push_back(a);
      search(transition(s, a, ctx_.domain), robot, value + ch.reward, seq);
      seq.pop_back();
      cond_.pop();
    }
    if (robot + 1 < s.team_size()) search(s, robot + 1, value, seq);
  }

  const PlanningContext& ctx_;
  Conditioner cond_;
  long max_expansions_;
  long expansions_ = 0;
  bool cut_ = false;
  std::vector<std::pair<double, Cell>> cap_;
  MesResult best_;
};

}  // namespace detail

/// Maximum-entropy set of paths chosen before exploration. Values are the
/// joint entropy of the path measurements given d0 by the chain rule;
/// revealing each cell at its posterior mean leaves the d0 means in place,
/// which is what the LGP joint entropy needs.
inline MesResult mes_nonadaptive(const PlanningContext& ctx, const PosteriorData& d0,
                                 const TeamState& s0, long max_expansions = 2'000'000) {
  return detail::MesSearch(ctx, d0, max_expansions).solve(s0);
}

/// Non-adaptive policy that commits to a precomputed action sequence.
class CommittedPolicy : public Policy {
 public:
  bool adaptive() const override { return false; }
};

class MesPolicy : public CommittedPolicy {
 public:
  MesPolicy(PlanningContext ctx, long max_expansions)
      : ctx_(std::move(ctx)), max_expansions_(max_expansions) {}

  std::string name() const override { return "mes"; }

  ActionSequence plan(const TeamState& s0, const PosteriorData& d0) override {
    last_ = mes_nonadaptive(ctx_, d0, s0, max_expansions_);
    return last_.actions;
  }

  const MesResult& last_result() const { return last_; }

 private:
  PlanningContext ctx_;
  long max_expansions_;
  MesResult last_;
};

/// Highest-reward legal action; ties keep the canonical action order.
inline ConstrainedJointAction greedy_adaptive(const PlanningContext& ctx, const TeamState& s,
                                              const PosteriorData& d) {
  const auto actions = constrained_actions(s, ctx.domain);
  if (actions.empty()) throw DeadEnd("no legal action");
  const auto cond = ctx.conditioner(d);
  std::vector<double> rewards;
  for (const auto& a : actions) rewards.push_back(candidate_reward(cond.prepare(target_cell(s, a)), ctx.model));
  return actions[argmax_first(rewards)];
}

class GreedyPolicy : public Policy {
 public:
  explicit GreedyPolicy(PlanningContext ctx) : ctx_(std::move(ctx)) {}
  std::string name() const override { return "greedy"; }
  bool adaptive() const override { return true; }
  ConstrainedJointAction act(const TeamState& s, const PosteriorData& d, int /*stage*/) override {
    return greedy_adaptive(ctx_, s, d);
  }

 private:
  PlanningContext ctx_;
};

/// Greedy path fixed from d0 alone: each chosen cell is revealed at its
/// posterior mean, so no measurement enters the plan.
inline ActionSequence greedy_nonadaptive(const PlanningContext& ctx, const TeamState& s0,
                                         const PosteriorData& d0) {
  auto cond = ctx.conditioner(d0);
  ActionSequence out;
  TeamState s = s0;
  for (int i = 0; i <= ctx.horizon; ++i) {
    const auto actions = constrained_actions(s, ctx.domain);
    if (actions.empty()) break;
    std::vector<Conditioner::Candidate> cands;
    std::vector<double> rewards;
    for (const auto& a : actions) {
      cands.push_back(cond.prepare(target_cell(s, a)));
      rewards.push_back(candidate_reward(cands.back(), ctx.model));
    }
    const std::size_t b = argmax_first(rewards);
    cond.push(cands[b], cands[b].mean);
    out.push_back(actions[b]);
    s = transition(s, actions[b], ctx.domain);
  }
  return out;
}

class NonAdaptiveGreedyPolicy : public CommittedPolicy {
 public:
  explicit NonAdaptiveGreedyPolicy(PlanningContext ctx) : ctx_(std::move(ctx)) {}
  std::string name() const override { return "greedy"; }
  ActionSequence plan(const TeamState& s0, const PosteriorData& d0) override {
    return greedy_nonadaptive(ctx_, s0, d0);
  }

 private:
  PlanningContext ctx_;
};

/// Mutual-information increment H[Z_y | A] - H[Z_y | rest] of each candidate
/// cell, where A is everything observed or selected and rest is every other
/// unobserved cell.
inline std::vector<double> mi_increments(const Hyperparams& h, const GridDomain& domain,
                                         const Conditioner& cond, const TeamState& s,
                                         const std::vector<Cell>& candidates) {
  std::vector<Cell> unobserved;
  for (const auto& c : domain.cells()) {
    if (!s.visited(domain, c)) unobserved.push_back(c);
  }
  Eigen::MatrixXd k = cross_covariance(unobserved, unobserved, h);
  k.diagonal().array() += h.jitter();
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw DegenerateCovariance("unobserved covariance is singular");
  std::vector<double> out;
  for (const auto& y : candidates) {
    const auto it = std::find(unobserved.begin(), unobserved.end(), y);
    if (it == unobserved.end()) throw InvalidArgument("candidate is not unobserved");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unobserved.size()));
    const auto idx = static_cast<Eigen::Index>(it - unobserved.begin());
    e(idx) = 1.0;
    const double precision = llt.solve(e)(idx);
    const double var_rest = 1.0 / precision;
    const double var_a = cond.moments(y).second;
    if (!(var_a > 0.0) || !(var_rest > 0.0)) throw DegenerateCovariance("non-positive variance");
    out.push_back(0.5 * std::log(var_a / var_rest));
  }
  return out;
}

inline ActionSequence mi_greedy(const PlanningContext& ctx, const TeamState& s0,
                                const PosteriorData& d0) {
  auto cond = ctx.conditioner(d0);
  ActionSequence out;
  TeamState s = s0;
  for (int i = 0; i <= ctx.horizon; ++i) {
    const auto actions = constrained_actions(s, ctx.domain);
    if (actions.empty()) {
      if (out.empty()) throw DeadEnd("no legal action");
      break;
    }
    std::vector<Cell> cells;
    for (const auto& a : actions) cells.push_back(target_cell(s, a));
    const auto gains = mi_increments(ctx.hyper, ctx.domain, cond, s, cells);
    const std::size_t b = argmax_first(gains);
    cond.push(cells[b], cond.moments(cells[b]).first);
    out.push_back(actions[b]);
    s = transition(s, actions[b], ctx.domain);
  }
  return out;
}

class MiPolicy : public CommittedPolicy {
 public:
  explicit MiPolicy(PlanningContext ctx) : ctx_(std::move(ctx)) {}
  std::string name() const override { return "mi"; }
  ActionSequence plan(const TeamState& s0, const PosteriorData& d0) override {
    return mi_greedy(ctx_, s0, d0);
  }

 private:
  PlanningContext ctx_;
};

}  // namespace imasp
