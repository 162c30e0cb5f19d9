#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "imasp/errors.hpp"

namespace imasp {

struct Cell {
  int row = 0;
  int col = 0;

  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

inline int squared_distance(Cell a, Cell b) {
  const int dr = a.row - b.row;
  const int dc = a.col - b.col;
  return dr * dr + dc * dc;
}

inline int manhattan_distance(Cell a, Cell b) {
  return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

/// Rectangular grid of sampling units, cells indexed row-major.
class GridDomain {
 public:
  GridDomain(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows <= 0 || cols <= 0) {
      throw InvalidArgument("grid dimensions must be positive");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return rows_ * cols_; }

  bool contains(Cell c) const {
    return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_;
  }

  int index(Cell c) const { return c.row * cols_ + c.col; }
  Cell cell(int index) const { return {index / cols_, index % cols_}; }

  std::vector<Cell> cells() const {
    std::vector<Cell> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (int i = 0; i < size(); ++i) out.push_back(cell(i));
    return out;
  }

  friend bool operator==(const GridDomain&, const GridDomain&) = default;

 private:
  int rows_;
  int cols_;
};

enum class Heading : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };
enum class Move : std::uint8_t { Front = 0, Left = 1, Right = 2 };

inline constexpr std::array<Move, 3> kMoves = {Move::Front, Move::Left, Move::Right};

inline Heading turn(Heading h, Move m) {
  const int v = static_cast<int>(h);
  switch (m) {
    case Move::Front: return h;
    case Move::Left: return static_cast<Heading>((v + 3) % 4);
    case Move::Right: return static_cast<Heading>((v + 1) % 4);
  }
  return h;
}

inline Cell step(Cell c, Heading h) {
  switch (h) {
    case Heading::North: return {c.row - 1, c.col};
    case Heading::East: return {c.row, c.col + 1};
    case Heading::South: return {c.row + 1, c.col};
    case Heading::West: return {c.row, c.col - 1};
  }
  return c;
}

inline const char* to_string(Move m) {
  switch (m) {
    case Move::Front: return "F";
    case Move::Left: return "L";
    case Move::Right: return "R";
  }
  return "?";
}

/// Heading that points toward the side of the grid with the most room.
/// Ties resolve in the order N, E, S, W.
inline Heading interior_heading(Cell c, const GridDomain& domain) {
  const std::array<int, 4> room = {c.row, domain.cols() - 1 - c.col,
                                   domain.rows() - 1 - c.row, c.col};
  const auto best = std::max_element(room.begin(), room.end());
  return static_cast<Heading>(best - room.begin());
}

struct RobotPose {
  Cell cell;
  Heading heading = Heading::North;
  int steps = 0;  // new cells visited so far

  friend bool operator==(const RobotPose&, const RobotPose&) = default;
};

/// Poses of the team plus the set of cells already observed. `budget` caps
/// the number of new cells each robot may visit; a negative budget is
/// unlimited.
class TeamState {
 public:
  TeamState(const GridDomain& domain, std::vector<RobotPose> poses,
            std::span<const Cell> observed = {}, int budget = -1)
      : poses_(std::move(poses)),
        visited_(static_cast<std::size_t>(domain.size()), 0),
        budget_(budget) {
    if (poses_.empty()) throw InvalidArgument("team needs at least one robot");
    for (const auto& p : poses_) {
      if (!domain.contains(p.cell)) throw InvalidArgument("robot pose outside domain");
      visited_[static_cast<std::size_t>(domain.index(p.cell))] = 1;
    }
    for (const auto& c : observed) {
      if (!domain.contains(c)) throw InvalidArgument("observed cell outside domain");
      visited_[static_cast<std::size_t>(domain.index(c))] = 1;
    }
  }

  /// Robots at `starts`, each facing the grid interior.
  static TeamState facing_interior(const GridDomain& domain, std::span<const Cell> starts,
                                   std::span<const Cell> observed = {}, int budget = -1) {
    std::vector<RobotPose> poses;
    for (const auto& c : starts) poses.push_back({c, interior_heading(c, domain), 0});
    return TeamState(domain, std::move(poses), observed, budget);
  }

  int team_size() const { return static_cast<int>(poses_.size()); }
  const std::vector<RobotPose>& poses() const { return poses_; }
  const RobotPose& pose(int robot) const { return poses_.at(static_cast<std::size_t>(robot)); }
  int budget() const { return budget_; }

  bool visited(const GridDomain& domain, Cell c) const {
    return visited_[static_cast<std::size_t>(domain.index(c))] != 0;
  }
  std::size_t visited_count() const {
    return static_cast<std::size_t>(std::count(visited_.begin(), visited_.end(), 1));
  }
  bool has_budget(int robot) const { return budget_ < 0 || pose(robot).steps < budget_; }

  // Mutation is reserved for the transition functions.
  void move_robot(const GridDomain& domain, int robot, Cell to, Heading heading) {
    auto& p = poses_[static_cast<std::size_t>(robot)];
    p.cell = to;
    p.heading = heading;
    ++p.steps;
    visited_[static_cast<std::size_t>(domain.index(to))] = 1;
  }

  friend bool operator==(const TeamState&, const TeamState&) = default;

 private:
  std::vector<RobotPose> poses_;
  std::vector<std::uint8_t> visited_;
  int budget_;
};

/// One robot moves, the rest stay put.
struct ConstrainedJointAction {
  int robot_index = 0;
  Move move = Move::Front;

  friend constexpr auto operator<=>(const ConstrainedJointAction&,
                                    const ConstrainedJointAction&) = default;
};

/// One move per robot, all robots moving simultaneously.
using JointMove = std::vector<Move>;

inline Cell target_cell(const TeamState& s, int robot, Move m) {
  const auto& p = s.pose(robot);
  return step(p.cell, turn(p.heading, m));
}

inline Cell target_cell(const TeamState& s, const ConstrainedJointAction& a) {
  return target_cell(s, a.robot_index, a.move);
}

inline bool is_legal_move(const TeamState& s, int robot, Move m, const GridDomain& domain) {
  if (!s.has_budget(robot)) return false;
  const Cell to = target_cell(s, robot, m);
  return domain.contains(to) && !s.visited(domain, to);
}

/// Ordered by robot index, then Front < Left < Right.
inline std::vector<ConstrainedJointAction> constrained_actions(const TeamState& s,
                                                               const GridDomain& domain) {
  std::vector<ConstrainedJointAction> out;
  out.reserve(static_cast<std::size_t>(3 * s.team_size()));
  for (int r = 0; r < s.team_size(); ++r) {
    for (Move m : kMoves) {
      if (is_legal_move(s, r, m, domain)) out.push_back({r, m});
    }
  }
  return out;
}

inline TeamState transition(const TeamState& s, const ConstrainedJointAction& a,
                            const GridDomain& domain) {
  if (a.robot_index < 0 || a.robot_index >= s.team_size() ||
      !is_legal_move(s, a.robot_index, a.move, domain)) {
    throw IllegalAction("action is not in the constrained action set");
  }
  TeamState next = s;
  const auto& p = s.pose(a.robot_index);
  const Heading h = turn(p.heading, a.move);
  next.move_robot(domain, a.robot_index, step(p.cell, h), h);
  return next;
}

/// Cartesian product of per-robot legal moves in lexicographic order, with
/// combinations sending two robots into the same cell removed. Every robot
/// moves, so a robot without a legal move empties the product.
inline std::vector<JointMove> full_joint_actions(const TeamState& s, const GridDomain& domain) {
  const int k = s.team_size();
  std::vector<std::vector<Move>> per_robot(static_cast<std::size_t>(k));
  for (int r = 0; r < k; ++r) {
    for (Move m : kMoves) {
      if (is_legal_move(s, r, m, domain)) per_robot[static_cast<std::size_t>(r)].push_back(m);
    }
    if (per_robot[static_cast<std::size_t>(r)].empty()) return {};
  }
  std::vector<JointMove> out;
  JointMove current(static_cast<std::size_t>(k));
  std::vector<Cell> targets(static_cast<std::size_t>(k));
  auto recurse = [&](auto&& self, int r) -> void {
    if (r == k) {
      out.push_back(current);
      return;
    }
    for (Move m : per_robot[static_cast<std::size_t>(r)]) {
      const Cell to = target_cell(s, r, m);
      bool clash = false;
      for (int q = 0; q < r; ++q) clash = clash || targets[static_cast<std::size_t>(q)] == to;
      if (clash) continue;
      current[static_cast<std::size_t>(r)] = m;
      targets[static_cast<std::size_t>(r)] = to;
      self(self, r + 1);
    }
  };
  recurse(recurse, 0);
  return out;
}

inline std::vector<Cell> target_cells(const TeamState& s, const JointMove& a) {
  std::vector<Cell> out;
  for (int r = 0; r < s.team_size(); ++r) out.push_back(target_cell(s, r, a[static_cast<std::size_t>(r)]));
  return out;
}

inline TeamState transition(const TeamState& s, const JointMove& a, const GridDomain& domain) {
  if (static_cast<int>(a.size()) != s.team_size()) {
    throw IllegalAction("joint move must assign one move per robot");
  }
  const auto targets = target_cells(s, a);
  for (int r = 0; r < s.team_size(); ++r) {
    if (!is_legal_move(s, r, a[static_cast<std::size_t>(r)], domain)) {
      throw IllegalAction("joint move contains an illegal robot move");
    }
    for (int q = 0; q < r; ++q) {
      if (targets[static_cast<std::size_t>(q)] == targets[static_cast<std::size_t>(r)]) {
        throw IllegalAction("joint move sends two robots into one cell");
      }
    }
  }
  TeamState next = s;
  for (int r = 0; r < s.team_size(); ++r) {
    const Heading h = turn(s.pose(r).heading, a[static_cast<std::size_t>(r)]);
    next.move_robot(domain, r, targets[static_cast<std::size_t>(r)], h);
  }
  return next;
}

}  // namespace imasp
