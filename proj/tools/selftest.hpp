#pragma once

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "imasp/imasp.hpp"

namespace imasp::tools {

namespace detail {

struct TinyInstance {
  GridDomain domain{3, 3};
  Hyperparams h{0.2, 1.0, 1.3, 0.0};
  PosteriorData d0;
  TeamState s0;
};

inline TinyInstance tiny(int budget) {
  TinyInstance t{GridDomain(3, 3), Hyperparams{0.2, 1.0, 1.3, 0.0}, {},
                 TeamState(GridDomain(3, 3), {{{1, 1}, Heading::North, 0}})};
  const auto field = sample_field(t.h, t.domain, 11);
  const std::vector<Cell> locs = {{1, 1}, {2, 0}};
  std::vector<double> z;
  for (const auto& c : locs) z.push_back(field.log_at(c));
  t.d0 = PosteriorData(locs, z);
  t.s0 = TeamState(t.domain, {{{1, 1}, Heading::North, 0}}, locs, budget);
  return t;
}

}  // namespace detail

/// Quick end-to-end invariant checks; one PASS/FAIL line each.
inline bool selftest(std::ostream& os) {
  struct Check {
    std::string name;
    std::function<bool()> run;
  };
  const std::vector<Check> checks = {
      {"incremental conditioning matches from-scratch posterior at unobserved cells",
       [] {
         const auto t = detail::tiny(3);
         const PlanningContext ctx(t.domain, t.h, Model::LGP, 0);
         const auto cond = ctx.conditioner(t.d0);
         for (const auto& c : t.domain.cells()) {
           if (t.d0.contains(c)) continue;
           const Cell one[] = {c};
           const auto g = posterior(t.d0, one, t.h);
           const auto [m, v] = cond.moments(c);
           if (std::abs(m - g.mean(0)) > 1e-10 || std::abs(v - g.covariance(0, 0)) > 1e-10) return false;
         }
         return true;
       }},
      {"Jensen and EM points preserve the mean",
       [] {
         for (int nu : {1, 3, 8}) {
           const auto p = outcome_points(make_partition(1.5, 0.7, nu, 4.0));
           double a = 0.0;
           double b = 0.0;
           for (std::size_t j = 0; j < p.jensen_weights.size(); ++j) a += p.jensen_weights[j] * p.jensen_points[j];
           for (std::size_t j = 0; j < p.em_weights.size(); ++j) b += p.em_weights[j] * p.em_points[j];
           if (std::abs(a - b) > 1e-10 || std::abs(a - 1.5) > 1e-10) return false;
         }
         return true;
       }},
      {"Jensen value <= exact value <= EM value",
       [] {
         const auto t = detail::tiny(2);
         const PlanningContext ctx(t.domain, t.h, Model::LGP, 1);
         PlannerConfig pc;
         pc.intervals = 4;
         const double lo = bounded_dp(ctx, t.d0, t.s0, pc, BoundSide::Lower).value;
         const double up = bounded_dp(ctx, t.d0, t.s0, pc, BoundSide::Upper).value;
         const double ex = exact_dp(ctx, t.d0, t.s0);
         return lo <= ex + 1e-8 && ex <= up + 1e-8;
       }},
      {"URTDP converges to the Jensen value",
       [] {
         const auto t = detail::tiny(3);
         const PlanningContext ctx(t.domain, t.h, Model::LGP, 2);
         PlannerConfig pc;
         pc.intervals = 2;
         pc.alpha = 1e-9;
         pc.max_simulated_paths = 100000;
         const auto r = urtdp(ctx, t.d0, t.s0, pc);
         const double lo = bounded_dp(ctx, t.d0, t.s0, pc, BoundSide::Lower).value;
         return r.converged && std::abs(r.root.lower - lo) < 1e-6 && std::abs(r.root.upper - lo) < 1e-6;
       }},
      {"GP: adaptive DP value equals the MES value",
       [] {
         const auto t = detail::tiny(3);
         const PlanningContext ctx(t.domain, t.h, Model::GP, 2);
         PlannerConfig pc;
         pc.intervals = 2;
         const double dp = bounded_dp(ctx, t.d0, t.s0, pc, BoundSide::Lower).value;
         const auto mes = mes_nonadaptive(ctx, t.d0, t.s0);
         return mes.optimal && std::abs(dp - mes.value) < 1e-8;
       }},
      {"paired t-test on identical samples is not significant",
       [] {
         const std::vector<double> a = {1, 2, 3, 4, 5, 6};
         const auto r = paired_ttest(a, a, 0.1);
         return r.statistic == 0.0 && !r.significant;
       }},
      {"field sampling is deterministic per seed",
       [] {
         const Hyperparams h{0.0, 1.0, 2.0, 0.0};
         const GridDomain dom(5, 4);
         return sample_field(h, dom, 5) == sample_field(h, dom, 5);
       }},
  };
  bool ok = true;
  for (const auto& c : checks) {
    bool pass = false;
    try {
      pass = c.run();
    } catch (const std::exception& e) {
      os << "  (" << e.what() << ")\n";
    }
    os << (pass ? "PASS " : "FAIL ") << c.name << '\n';
    ok = ok && pass;
  }
  return ok;
}

}  // namespace imasp::tools
