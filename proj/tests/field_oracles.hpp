#pragma once

#include <cmath>
#include <future>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "imasp/field_model.hpp"

namespace imasp::testing {

struct OracleResult {
  bool pass = false;
  std::string detail;
};

inline OracleResult kernel_formula_check() {
  const Hyperparams h{0.0, 2.0, 1.0, 0.0};
  const double got = covariance({0, 0}, {0, 1}, h);
  const double want = 2.0 * std::exp(-0.5);
  std::ostringstream os;
  os << "k = " << got << ", direct formula " << want;
  return {std::abs(got - want) < 1e-15, os.str()};
}

/// Two noisy observations and one target, against the explicit inverse of
/// the 2x2 Gram matrix.
inline OracleResult two_by_two_posterior_check() {
  const Hyperparams h{0.3, 1.7, 1.4, 0.2};
  const Cell x1{0, 0};
  const Cell x2{1, 2};
  const Cell y{2, 1};
  const double z1 = 1.1;
  const double z2 = -0.4;
  const PosteriorData d({x1, x2}, {z1, z2});
  const Cell targets[] = {y};
  const auto g = posterior(d, targets, h);

  const double a = covariance(x1, x1, h);
  const double b = covariance(x1, x2, h);
  const double c = covariance(x2, x2, h);
  const double det = a * c - b * b;
  const double i11 = c / det;
  const double i12 = -b / det;
  const double i22 = a / det;
  const double k1 = covariance(y, x1, h);
  const double k2 = covariance(y, x2, h);
  const double r1 = z1 - h.mean;
  const double r2 = z2 - h.mean;
  const double mean = h.mean + k1 * (i11 * r1 + i12 * r2) + k2 * (i12 * r1 + i22 * r2);
  const double var = covariance(y, y, h) - (k1 * (i11 * k1 + i12 * k2) + k2 * (i12 * k1 + i22 * k2));
  std::ostringstream os;
  os << "mean " << g.mean(0) << " vs " << mean << ", var " << g.covariance(0, 0) << " vs " << var;
  return {std::abs(g.mean(0) - mean) < 1e-12 && std::abs(g.covariance(0, 0) - var) < 1e-12, os.str()};
}

inline OracleResult correlated_entropy_check() {
  PosteriorGaussian g;
  g.mean = Eigen::Vector2d::Zero();
  g.covariance.resize(2, 2);
  g.covariance << 1.0, 0.5, 0.5, 1.0;
  const double want = std::log(kTwoPiE) + 0.5 * std::log(0.75);
  const double got = gaussian_entropy(g);
  std::ostringstream os;
  os << "H = " << got << ", closed form " << want;
  return {std::abs(got - want) < 1e-12, os.str()};
}

/// Sample mean and standard error.
struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

template <class F>
Estimate monte_carlo(int n, std::uint64_t seed, F&& draw) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double s = 0.0;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = draw(normal(rng));
    s += v;
    s2 += v * v;
  }
  const double mean = s / n;
  const double var = (s2 - n * mean * mean) / (n - 1);
  return {mean, std::sqrt(var / n)};
}

inline PosteriorData oracle_data() {
  return PosteriorData({{0, 0}, {2, 3}, {4, 1}}, {0.8, -0.2, 0.5});
}

inline Hyperparams oracle_hyper() { return {0.1, 0.9, 1.6, 0.05}; }

/// Differential entropy of exp(Z) as the sample mean of -log f_Y(Y).
inline OracleResult lgp_entropy_monte_carlo_check() {
  const auto d = oracle_data();
  const auto h = oracle_hyper();
  const Cell targets[] = {Cell{3, 3}};
  const auto g = posterior(d, targets, h);
  const double m = g.mean(0);
  const double s = std::sqrt(g.covariance(0, 0));
  const auto est = monte_carlo(1'000'000, 2024, [&](double u) {
    const double z = m + s * u;
    return 0.5 * std::log(2.0 * std::numbers::pi * s * s) + 0.5 * u * u + z;
  });
  const double got = lgp_entropy(d, targets, h);
  std::ostringstream os;
  os << "H = " << got << ", MC " << est.mean << " +- " << est.se;
  return {std::abs(got - est.mean) <= 3.0 * est.se, os.str()};
}

inline OracleResult lognormal_mean_monte_carlo_check() {
  const auto d = oracle_data();
  const auto h = oracle_hyper();
  const Cell x{1, 4};
  const Cell targets[] = {x};
  const auto g = posterior(d, targets, h);
  const double m = g.mean(0);
  const double s = std::sqrt(g.covariance(0, 0));
  const auto est = monte_carlo(1'000'000, 77, [&](double u) { return std::exp(m + s * u); });
  const double got = lognormal_predictor(d, x, h);
  std::ostringstream os;
  os << "E[Y] = " << got << ", MC " << est.mean << " +- " << est.se;
  return {std::abs(got - est.mean) <= 3.0 * est.se, os.str()};
}

/// 10^4 fields on 14x12: every per-cell mean of log y and the covariance of
/// two adjacent cells, each within 3 standard errors.
inline OracleResult sampled_field_moments_check() {
  const GridDomain dom(14, 12);
  const Hyperparams h{0.4, 1.3, 2.0, 0.0};
  const FieldSampler sampler(h, dom);
  const int n = 10'000;
  const auto cells = static_cast<std::size_t>(dom.size());
  std::vector<double> s1(cells, 0.0);
  std::vector<double> s2(cells, 0.0);
  const int a = dom.index({6, 5});
  const int b = dom.index({6, 6});
  std::vector<double> pa;
  std::vector<double> pb;
  for (int i = 0; i < n; ++i) {
    const auto y = sampler.sample(static_cast<std::uint64_t>(i)).values();
    for (std::size_t c = 0; c < cells; ++c) {
      const double v = std::log(y[c]);
      s1[c] += v;
      s2[c] += v * v;
    }
    pa.push_back(std::log(y[static_cast<std::size_t>(a)]));
    pb.push_back(std::log(y[static_cast<std::size_t>(b)]));
  }
  int worst_cell = 0;
  double worst = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    const double mean = s1[c] / n;
    const double var = (s2[c] - n * mean * mean) / (n - 1);
    const double score = std::abs(mean - h.mean) / std::sqrt(var / n);
    if (score > worst) {
      worst = score;
      worst_cell = static_cast<int>(c);
    }
  }
  // Covariance with the known mean: the sample of products has a plain
  // standard error.
  double sp = 0.0;
  double sp2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = (pa[static_cast<std::size_t>(i)] - h.mean) * (pb[static_cast<std::size_t>(i)] - h.mean);
    sp += p;
    sp2 += p * p;
  }
  const double cov = sp / n;
  const double cov_se = std::sqrt((sp2 / n - cov * cov) / (n - 1));
  const double kernel = covariance(dom.cell(a), dom.cell(b), h);
  const double cov_score = std::abs(cov - kernel) / cov_se;
  std::ostringstream os;
  os << "worst cell mean " << worst << " SE (cell " << worst_cell << "), adjacent covariance " << cov
     << " vs kernel " << kernel << " (" << cov_score << " SE)";
  return {worst <= 3.0 && cov_score <= 3.0, os.str()};
}

/// Length scale recovered within one grid step in at least 16 of 20 seeds.
inline OracleResult hyperparameter_recovery_check() {
  const GridDomain dom(14, 12);
  const Hyperparams truth{0.0, 1.0, 2.0, 0.01};
  const FieldSampler sampler(truth, dom);
  std::vector<std::future<int>> jobs;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    jobs.push_back(std::async(std::launch::async, [&, seed] {
      const auto field = sampler.sample(1000 + seed);
      std::mt19937_64 rng(seed);
      auto cells = dom.cells();
      std::vector<Cell> chosen;
      std::sample(cells.begin(), cells.end(), std::back_inserter(chosen), 100, rng);
      std::vector<double> z;
      for (const auto& c : chosen) z.push_back(field.log_at(c));
      const PosteriorData obs(chosen, z);
      const auto grid = HyperparamGrid::defaults(obs, dom);
      const auto fit = fit_hyperparams(obs, dom, grid);
      const auto& ls = grid.length_scales;
      const double step = std::log(ls[1] / ls[0]);
      return std::abs(std::log(fit.length_scale / truth.length_scale)) <= step * (1.0 + 1e-12) ? 1 : 0;
    }));
  }
  int hits = 0;
  for (auto& j : jobs) hits += j.get();
  std::ostringstream os;
  os << hits << "/20 seeds within one grid step";
  return {hits >= 16, os.str()};
}

inline std::vector<std::pair<std::string, OracleResult (*)()>> field_oracles() {
  return {{"kernel formula", kernel_formula_check},
          {"2x2 closed-form posterior", two_by_two_posterior_check},
          {"correlated entropy", correlated_entropy_check},
          {"LGP entropy vs Monte Carlo", lgp_entropy_monte_carlo_check},
          {"lognormal mean vs Monte Carlo", lognormal_mean_monte_carlo_check},
          {"sampled field moments", sampled_field_moments_check},
          {"hyperparameter recovery", hyperparameter_recovery_check}};
}

}  // namespace imasp::testing
