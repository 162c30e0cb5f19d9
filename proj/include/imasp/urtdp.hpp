#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <boost/container_hash/hash.hpp>

#include "imasp/outcome_discretization.hpp"
#include "imasp/planning.hpp"

namespace imasp {

/// Canonical encoding of a planning state: stage, team poses and the full
/// observation history, measurement values at full precision.
struct StateKey {
  int stage = 0;
  std::vector<std::int32_t> poses;  // row, col, heading, steps per robot
  std::vector<Cell> locations;
  std::vector<std::uint64_t> values;  // bit patterns

  friend bool operator==(const StateKey&, const StateKey&) = default;
};

inline StateKey make_state_key(int stage, const TeamState& s, const PosteriorData& d) {
  StateKey k;
  k.stage = stage;
  for (const auto& p : s.poses()) {
    k.poses.insert(k.poses.end(),
                   {p.cell.row, p.cell.col, static_cast<std::int32_t>(p.heading), p.steps});
  }
  k.locations = d.locations();
  for (double z : d.log_measurements()) k.values.push_back(std::bit_cast<std::uint64_t>(z));
  return k;
}

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const {
    std::size_t h = boost::hash_value(k.stage);
    boost::hash_combine(h, boost::hash_range(k.poses.begin(), k.poses.end()));
    for (const auto& c : k.locations) {
      boost::hash_combine(h, c.row);
      boost::hash_combine(h, c.col);
    }
    boost::hash_combine(h, boost::hash_range(k.values.begin(), k.values.end()));
    return h;
  }
};

/// Heuristic bracket of the lower (Jensen) value at a state.
///
/// The lower end is the return of a greedy rollout that reveals each cell at
/// its posterior mean. Along a fixed path every reward is affine in earlier
/// measurements, and the Jensen points preserve the mean, so this is the
/// Jensen value of that path and hence a feasible lower value.
///
/// The upper end bounds each remaining reward by the prior-variance entropy
/// plus the largest posterior mean reachable in time; every Jensen reveal
/// can raise a posterior mean by at most max|offset| times the prior sd.
inline ValueBounds init_bounds(const PlanningContext& ctx, Conditioner& cond, const TeamState& s,
                               int stage, const StandardOutcomes& outcomes) {
  const int remaining = ctx.horizon - stage + 1;
  if (remaining <= 0) return {};
  if (constrained_actions(s, ctx.domain).empty()) return {};

  ValueBounds b;
  {
    TeamState cur = s;
    int pushed = 0;
    for (int q = 0; q < remaining; ++q) {
      const auto actions = constrained_actions(cur, ctx.domain);
      if (actions.empty()) break;
      std::size_t best = 0;
      double best_reward = -std::numeric_limits<double>::infinity();
      Conditioner::Candidate best_cand;
      for (std::size_t i = 0; i < actions.size(); ++i) {
        auto cand = cond.prepare(target_cell(cur, actions[i]));
        const double r = candidate_reward(cand, ctx.model);
        if (r > best_reward) {
          best_reward = r;
          best = i;
          best_cand = std::move(cand);
        }
      }
      b.lower += best_reward;
      if (q + 1 < remaining) {
        cond.push(best_cand, best_cand.mean);
        ++pushed;
      }
      cur = transition(cur, actions[best], ctx.domain);
    }
    for (int i = 0; i < pushed; ++i) cond.pop();
  }

  if (remaining == 1) {
    b.upper = b.lower;
    return b;
  }

  const double var0 = ctx.hyper.prior_variance();
  const double entropy0 = 0.5 * std::log(kTwoPiE * var0);
  if (ctx.model == Model::GP) {
    b.upper = remaining * std::max(0.0, entropy0);
  } else {
    const double sd0 = std::sqrt(var0);
    const double rise = outcomes.max_jensen_offset() * sd0;
    const auto alpha = cond.weights();
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& c : ctx.domain.cells()) {
      if (s.visited(ctx.domain, c)) continue;
      bool reachable = false;
      for (int r = 0; r < s.team_size() && !reachable; ++r) {
        const int left = s.budget() < 0 ? remaining : std::min(remaining, s.budget() - s.pose(r).steps);
        reachable = manhattan_distance(s.pose(r).cell, c) <= left;
      }
      if (reachable) top = std::max(top, cond.mean_with_weights(c, alpha));
    }
    for (int q = 0; q < remaining; ++q) b.upper += std::max(0.0, entropy0 + top + q * rise);
  }
  b.upper = std::max(b.upper, b.lower);
  return b;
}

inline ValueBounds init_bounds(const PlanningContext& ctx, const PosteriorData& d,
                               const TeamState& s, int stage, const PlannerConfig& config) {
  auto cond = ctx.conditioner(d);
  return init_bounds(ctx, cond, s, stage, StandardOutcomes::make(config.intervals, config.truncation));
}

struct UrtdpResult {
  ValueBounds root;
  long simulated_paths = 0;
  bool converged = false;  // gap closed to alpha before the path budget ran out
  std::size_t nodes = 0;
};

/// Anytime solver of the lower (Jensen) problem. Each simulated path
/// descends greedily on the upper action values, samples outcomes in
/// proportion to their weighted bound gaps and backs the bounds up exactly.
class Urtdp {
 public:
  /// Called after every backup with the node index, its stage, the state,
  /// the conditioner holding that node's history and its new bounds.
  using Observer = std::function<void(std::size_t, int, const TeamState&, const Conditioner&,
                                      const ValueBounds&)>;

  Urtdp(PlanningContext ctx, const PosteriorData& d, TeamState s, int stage, PlannerConfig config)
      : ctx_(std::move(ctx)),
        config_(config),
        outcomes_(StandardOutcomes::make(config.intervals, config.truncation)),
        weights_(outcomes_.weights(false)),
        offsets_(outcomes_.offsets(false)),
        cond_(ctx_.conditioner(d)),
        root_state_(std::move(s)),
        root_stage_(stage),
        rng_(config.seed) {
    config.validate();
    nodes_.push_back(Node{init_bounds(ctx_, cond_, root_state_, stage, outcomes_), -1, 0, stage});
    if (stage == ctx_.horizon) {
      // Leaf values are exact from the start.
      nodes_.front().closed = true;
    }
  }

  void set_observer(Observer f) { observer_ = std::move(f); }

  const ValueBounds& root_bounds() const { return nodes_.front().bounds; }
  std::size_t node_count() const { return nodes_.size(); }
  long simulated_paths() const { return paths_; }

  UrtdpResult run() {
    do {
      simulated_path();
    } while (root_bounds().gap() > config_.alpha && paths_ < config_.max_simulated_paths);
    return {root_bounds(), paths_, root_bounds().gap() <= config_.alpha, nodes_.size()};
  }

  void simulated_path() {
    ++paths_;
    struct Step {
      std::size_t node;
      std::size_t edge;
    };
    std::vector<Step> trail;
    std::vector<TeamState> states{root_state_};
    std::size_t node = 0;
    int stage = root_stage_;
    while (true) {
      Node& n = nodes_[node];
      if (n.closed || n.bounds.gap() <= 0.0) break;
      if (n.first_edge < 0) expand(node, states.back(), stage);
      const Node& e = nodes_[node];
      if (e.edge_count == 0 || stage >= ctx_.horizon) break;
      std::size_t best = static_cast<std::size_t>(e.first_edge);
      for (std::size_t i = best + 1; i < static_cast<std::size_t>(e.first_edge) + e.edge_count; ++i) {
        if (edges_[i].q.upper > edges_[best].q.upper) best = i;
      }
      const Edge& edge = edges_[best];
      const std::size_t j = sample_outcome(edge);
      const TeamState& s = states.back();
      const auto cand = cond_.prepare(target_cell(s, edge.action));
      cond_.push(cand, cand.mean + std::sqrt(cand.variance) * offsets_[j]);
      states.push_back(transition(s, edge.action, ctx_.domain));
      trail.push_back({node, best});
      node = static_cast<std::size_t>(edge.first_child) + j;
      ++stage;
    }

    // The deepest node reached keeps its values; back up its ancestors.
    for (std::size_t i = trail.size(); i-- > 0;) {
      cond_.pop();
      states.pop_back();
      --stage;
      const auto [parent, edge] = trail[i];
      edges_[edge].q = action_bounds(edges_[edge]);
      refresh(parent);
      if (observer_) observer_(parent, stage, states.back(), cond_, nodes_[parent].bounds);
    }
  }

  /// Action at the root that is greedy on the lower bound.
  ConstrainedJointAction greedy_action() {
    if (nodes_.front().first_edge < 0) expand(0, root_state_, root_stage_);
    const Node& r = nodes_.front();
    if (r.edge_count == 0) throw DeadEnd("no legal action");
    std::size_t best = static_cast<std::size_t>(r.first_edge);
    for (std::size_t i = best + 1; i < static_cast<std::size_t>(r.first_edge) + r.edge_count; ++i) {
      if (edges_[i].q.lower > edges_[best].q.lower) best = i;
    }
    return edges_[best].action;
  }

  /// Lower/upper action values at the root, in constrained-action order.
  std::vector<ValueBounds> root_action_bounds() {
    if (nodes_.front().first_edge < 0) expand(0, root_state_, root_stage_);
    const Node& r = nodes_.front();
    std::vector<ValueBounds> out;
    for (std::size_t i = 0; i < r.edge_count; ++i) {
      out.push_back(edges_[static_cast<std::size_t>(r.first_edge) + i].q);
    }
    return out;
  }

 private:
  struct Node {
    ValueBounds bounds;
    std::int64_t first_edge = -1;  // -1 until expanded
    std::uint32_t edge_count = 0;
    int stage = 0;
    bool closed = false;
  };

  struct Edge {
    ConstrainedJointAction action;
    double reward = 0.0;
    ValueBounds q;
    std::int64_t first_child = -1;
  };

  ValueBounds action_bounds(const Edge& e) const {
    ValueBounds q{e.reward, e.reward};
    if (e.first_child < 0) return q;
    for (std::size_t j = 0; j < weights_.size(); ++j) {
      const auto& c = nodes_[static_cast<std::size_t>(e.first_child) + j].bounds;
      q.lower += weights_[j] * c.lower;
      q.upper += weights_[j] * c.upper;
    }
    return q;
  }

  void refresh(std::size_t node) {
    Node& n = nodes_[node];
    if (n.edge_count == 0) return;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n.edge_count; ++i) {
      const auto& q = edges_[static_cast<std::size_t>(n.first_edge) + i].q;
      lo = std::max(lo, q.lower);
      hi = std::max(hi, q.upper);
    }
    n.bounds = {lo, hi};
  }

  void expand(std::size_t node, const TeamState& s, int stage) {
    const auto actions = constrained_actions(s, ctx_.domain);
    const auto first = static_cast<std::int64_t>(edges_.size());
    for (const auto& a : actions) {
      const auto cand = cond_.prepare(target_cell(s, a));
      Edge e{a, candidate_reward(cand, ctx_.model), {}, -1};
      if (stage < ctx_.horizon) {
        const TeamState next = transition(s, a, ctx_.domain);
        e.first_child = static_cast<std::int64_t>(nodes_.size());
        const double sd = std::sqrt(cand.variance);
        ValueBounds shared;
        for (std::size_t j = 0; j < offsets_.size(); ++j) {
          ValueBounds b;
          if (ctx_.model == Model::GP && j > 0) {
            // GP heuristics ignore the revealed value.
            b = shared;
          } else {
            cond_.push(cand, cand.mean + sd * offsets_[j]);
            b = init_bounds(ctx_, cond_, next, stage + 1, outcomes_);
            cond_.pop();
            shared = b;
          }
          Node child{b, -1, 0, stage + 1};
          child.closed = stage + 1 == ctx_.horizon || b.gap() <= 0.0;
          nodes_.push_back(child);
        }
      }
      e.q = action_bounds(e);
      edges_.push_back(e);
    }
    Node& n = nodes_[node];
    n.first_edge = first;
    n.edge_count = static_cast<std::uint32_t>(actions.size());
    if (actions.empty()) {
      n.bounds = {};
      n.closed = true;
      return;
    }
    refresh(node);
    if (stage >= ctx_.horizon) n.closed = true;
  }

  std::size_t sample_outcome(const Edge& e) {
    const std::size_t nu = weights_.size();
    std::vector<double> xi(nu);
    double total = 0.0;
    for (std::size_t j = 0; j < nu; ++j) {
      const auto& b = nodes_[static_cast<std::size_t>(e.first_child) + j].bounds;
      xi[j] = weights_[j] * std::max(0.0, b.gap());
      total += xi[j];
    }
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    if (!(total > 0.0)) return std::min(nu - 1, static_cast<std::size_t>(u * static_cast<double>(nu)));
    double acc = 0.0;
    const double target = u * total;
    for (std::size_t j = 0; j < nu; ++j) {
      acc += xi[j];
      if (target < acc && xi[j] > 0.0) return j;
    }
    for (std::size_t j = nu; j-- > 0;) {
      if (xi[j] > 0.0) return j;
    }
    return nu - 1;
  }

  PlanningContext ctx_;
  PlannerConfig config_;
  StandardOutcomes outcomes_;
  const std::vector<double>& weights_;
  const std::vector<double>& offsets_;
  Conditioner cond_;
  TeamState root_state_;
  int root_stage_;
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  long paths_ = 0;
  Observer observer_;
};

inline UrtdpResult urtdp(const PlanningContext& ctx, const PosteriorData& d0, const TeamState& s0,
                         const PlannerConfig& config) {
  Urtdp solver(ctx, d0, s0, 0, config);
  return solver.run();
}

/// Replans with a fresh URTDP search from every state it is asked about and
/// plays the action that is greedy on the lower bound.
class UrtdpPolicy : public Policy {
 public:
  UrtdpPolicy(PlanningContext ctx, PlannerConfig config) : ctx_(std::move(ctx)), config_(config) {
    config_.validate();
  }

  std::string name() const override { return "urtdp"; }
  bool adaptive() const override { return true; }

  ConstrainedJointAction act(const TeamState& s, const PosteriorData& d, int stage) override {
    if (constrained_actions(s, ctx_.domain).empty()) throw DeadEnd("no legal action");
    PlannerConfig c = config_;
    c.seed = config_.seed + static_cast<std::uint64_t>(stage);
    Urtdp solver(ctx_, d, s, stage, c);
    last_ = solver.run();
    return solver.greedy_action();
  }

  const UrtdpResult& last_result() const { return last_; }

 private:
  PlanningContext ctx_;
  PlannerConfig config_;
  UrtdpResult last_;
};

}  // namespace imasp
