#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "imasp/conditioner.hpp"
#include "imasp/errors.hpp"
#include "imasp/field_model.hpp"
#include "imasp/world.hpp"

namespace imasp {

/// Field model a planner assumes: GP maps log-measurements, LGP maps the
/// original positive measurements.
enum class Model { GP, LGP };

inline const char* to_string(Model m) { return m == Model::GP ? "GP" : "LGP"; }

struct PlannerConfig {
  int intervals = 4;             // nu
  double truncation = 4.0;       // m, in standard deviations
  double alpha = 1e-3;           // URTDP stopping gap
  long max_simulated_paths = 1000;
  int horizon = 0;               // t; stages 0..t observe t + 1 cells
  std::uint64_t seed = 0;
  long mes_max_expansions = 2'000'000;

  void validate() const {
    if (intervals < 1) throw InvalidArgument("intervals must be positive");
    if (!(truncation > 0.0)) throw InvalidArgument("truncation must be positive");
    if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
    if (max_simulated_paths < 1) throw InvalidArgument("max_simulated_paths must be positive");
    if (horizon < 0) throw InvalidArgument("horizon must be non-negative");
  }
};

struct ValueBounds {
  double lower = 0.0;
  double upper = 0.0;

  double gap() const { return upper - lower; }
};

enum class BoundSide { Lower, Upper };

/// Everything a planner needs besides the state: the domain, the assumed
/// prior and the last stage index.
struct PlanningContext {
  GridDomain domain;
  Hyperparams hyper;
  Model model = Model::LGP;
  int horizon = 0;
  std::shared_ptr<const KernelTable> kernel;

  PlanningContext(GridDomain d, Hyperparams h, Model m, int t)
      : domain(d), hyper(h), model(m), horizon(t),
        kernel(std::make_shared<KernelTable>(h, d)) {
    h.validate();
    if (t < 0) throw InvalidArgument("horizon must be non-negative");
  }

  Conditioner conditioner(const PosteriorData& d) const { return Conditioner(hyper, d, kernel); }
};

/// Entropy of a single new measurement with the given posterior moments.
inline double single_cell_reward(double mean, double variance, Model model) {
  if (!(variance > 0.0)) throw DegenerateCovariance("non-positive posterior variance");
  double r = 0.5 * std::log(kTwoPiE * variance);
  if (model == Model::LGP) r += mean;
  return r;
}

inline double candidate_reward(const Conditioner::Candidate& c, Model model) {
  return single_cell_reward(c.mean, c.variance, model);
}

/// Entropy of the measurement(s) a joint action would collect, given `d`:
/// the log-scale Gaussian entropy for GP, the original-scale entropy for LGP.
inline double stagewise_reward(const TeamState& s, const ConstrainedJointAction& a,
                               const PosteriorData& d, Model model, const GridDomain& domain,
                               const Hyperparams& h) {
  if (a.robot_index < 0 || a.robot_index >= s.team_size() ||
      !is_legal_move(s, a.robot_index, a.move, domain)) {
    throw IllegalAction("reward requested for an illegal action");
  }
  const Cell targets[] = {target_cell(s, a)};
  return model == Model::LGP ? lgp_entropy(d, targets, h)
                             : gaussian_entropy(posterior(d, targets, h));
}

inline double stagewise_reward(const TeamState& s, const JointMove& a, const PosteriorData& d,
                               Model model, const GridDomain& domain, const Hyperparams& h) {
  transition(s, a, domain);  // legality check
  const auto targets = target_cells(s, a);
  return model == Model::LGP ? lgp_entropy(d, targets, h)
                             : gaussian_entropy(posterior(d, targets, h));
}

/// An exploration policy. Adaptive policies choose one constrained action
/// per stage from the data gathered so far; non-adaptive policies commit to
/// the whole action sequence before any measurement is revealed.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual bool adaptive() const = 0;

  virtual ConstrainedJointAction act(const TeamState& /*s*/, const PosteriorData& /*d*/,
                                     int /*stage*/) {
    throw InvalidArgument(name() + " is not an adaptive policy");
  }

  virtual std::vector<ConstrainedJointAction> plan(const TeamState& /*s0*/,
                                                   const PosteriorData& /*d0*/) {
    throw InvalidArgument(name() + " is not a non-adaptive policy");
  }
};

/// Lowest-index action with the largest value.
inline std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace imasp
