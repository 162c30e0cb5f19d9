#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "imasp/errors.hpp"
#include "imasp/world.hpp"

namespace imasp {

inline constexpr double kTwoPiE = 2.0 * std::numbers::pi * std::numbers::e;

/// GP prior over log-measurements: constant mean, isotropic squared-exponential
/// kernel and a nugget on the diagonal.
struct Hyperparams {
  double mean = 0.0;
  double signal_variance = 1.0;
  double length_scale = 1.0;
  double noise_variance = 0.0;

  void validate() const {
    if (!(signal_variance > 0.0)) throw InvalidArgument("signal_variance must be positive");
    if (!(length_scale > 0.0)) throw InvalidArgument("length_scale must be positive");
    if (!(noise_variance >= 0.0)) throw InvalidArgument("noise_variance must be non-negative");
  }

  /// Marginal variance of one measurement, jitter included.
  double prior_variance() const { return signal_variance + noise_variance + jitter(); }

  /// Diagonal floor applied to Gram matrices when there is no nugget.
  double jitter() const { return noise_variance > 0.0 ? 0.0 : 1e-10 * signal_variance; }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

inline double covariance(Cell x, Cell u, const Hyperparams& h) {
  const double d2 = static_cast<double>(squared_distance(x, u));
  double k = h.signal_variance * std::exp(-d2 / (2.0 * h.length_scale * h.length_scale));
  if (x == u) k += h.noise_variance;
  return k;
}

/// Observation history: prior block first, then one entry per stage.
class PosteriorData {
 public:
  PosteriorData() = default;

  PosteriorData(std::vector<Cell> locations, std::vector<double> log_measurements)
      : PosteriorData(locations, log_measurements, locations.size()) {}

  PosteriorData(std::vector<Cell> locations, std::vector<double> log_measurements,
                std::size_t prior_count)
      : locations_(std::move(locations)),
        values_(std::move(log_measurements)),
        prior_count_(prior_count) {
    if (locations_.size() != values_.size()) {
      throw InvalidArgument("locations and log_measurements differ in length");
    }
    if (prior_count_ > locations_.size()) throw InvalidArgument("prior block longer than history");
    for (std::size_t i = 0; i < locations_.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (locations_[i] == locations_[j]) {
          throw InvalidArgument("duplicate observed location");
        }
      }
    }
  }

  const std::vector<Cell>& locations() const { return locations_; }
  const std::vector<double>& log_measurements() const { return values_; }
  std::size_t size() const { return locations_.size(); }
  bool empty() const { return locations_.empty(); }
  std::size_t prior_count() const { return prior_count_; }

  bool contains(Cell c) const {
    for (const auto& l : locations_) {
      if (l == c) return true;
    }
    return false;
  }

  PosteriorData observe(Cell c, double z) const {
    if (contains(c)) throw InvalidArgument("cell already observed");
    PosteriorData next = *this;
    next.locations_.push_back(c);
    next.values_.push_back(z);
    return next;
  }

  /// Copy with one measurement replaced; used to probe value dependence.
  PosteriorData with_value(std::size_t i, double z) const {
    PosteriorData next = *this;
    next.values_.at(i) = z;
    return next;
  }

  friend bool operator==(const PosteriorData&, const PosteriorData&) = default;

 private:
  std::vector<Cell> locations_;
  std::vector<double> values_;
  std::size_t prior_count_ = 0;
};

struct PosteriorGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  Eigen::Index dimension() const { return mean.size(); }
};

inline Eigen::MatrixXd cross_covariance(std::span<const Cell> a, std::span<const Cell> b,
                                        const Hyperparams& h) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = covariance(a[i], b[j], h);
    }
  }
  return k;
}

/// Cholesky factor of the Gram matrix of `locations` (jitter included).
inline Eigen::LLT<Eigen::MatrixXd> factorize_gram(std::span<const Cell> locations,
                                                  const Hyperparams& h) {
  if (h.noise_variance == 0.0) {
    for (std::size_t i = 0; i < locations.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (locations[i] == locations[j]) {
          throw SingularGram("duplicate observed locations with zero nugget");
        }
      }
    }
  }
  Eigen::MatrixXd gram = cross_covariance(locations, locations, h);
  gram.diagonal().array() += h.jitter();
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw SingularGram("Gram matrix is not positive definite");
  return llt;
}

/// Posterior mean and covariance of the measurements at `targets` given `d`.
inline PosteriorGaussian posterior(const PosteriorData& d, std::span<const Cell> targets,
                                   const Hyperparams& h) {
  if (targets.empty()) throw InvalidArgument("posterior needs at least one target");
  const auto m = static_cast<Eigen::Index>(targets.size());
  PosteriorGaussian g;
  g.mean = Eigen::VectorXd::Constant(m, h.mean);
  g.covariance = cross_covariance(targets, targets, h);
  g.covariance.diagonal().array() += h.jitter();
  if (d.empty()) return g;

  const auto& locs = d.locations();
  auto llt = factorize_gram(locs, h);
  const auto n = static_cast<Eigen::Index>(locs.size());
  Eigen::VectorXd residual(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    residual(i) = d.log_measurements()[static_cast<std::size_t>(i)] - h.mean;
  }
  const Eigen::MatrixXd k_obs_target = cross_covariance(locs, targets, h);
  const Eigen::MatrixXd v = llt.matrixL().solve(k_obs_target);
  const Eigen::VectorXd beta = llt.matrixL().solve(residual);
  g.mean += v.transpose() * beta;
  g.covariance -= v.transpose() * v;
  if (h.noise_variance == 0.0) {
    // Noiseless observations are interpolated exactly at observed targets.
    for (Eigen::Index t = 0; t < m; ++t) {
      for (std::size_t i = 0; i < locs.size(); ++i) {
        if (locs[i] != targets[static_cast<std::size_t>(t)]) continue;
        g.mean(t) = d.log_measurements()[i];
        g.covariance.row(t).setZero();
        g.covariance.col(t).setZero();
      }
    }
  }
  return g;
}

inline double log_determinant(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw DegenerateCovariance("covariance is not positive definite");
  }
  double logdet = 0.0;
  const Eigen::MatrixXd& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0)) throw DegenerateCovariance("zero pivot in covariance factor");
    logdet += 2.0 * std::log(l(i, i));
  }
  if (!std::isfinite(logdet)) throw DegenerateCovariance("log-determinant is not finite");
  return logdet;
}

/// Differential entropy (nats) of a multivariate Gaussian.
inline double gaussian_entropy(const PosteriorGaussian& g) {
  const auto k = static_cast<double>(g.dimension());
  return 0.5 * (k * std::log(kTwoPiE) + log_determinant(g.covariance));
}

/// Entropy of the original-scale measurements exp(Z) at `targets`.
inline double lgp_entropy(const PosteriorData& d, std::span<const Cell> targets,
                          const Hyperparams& h) {
  const auto g = posterior(d, targets, h);
  return gaussian_entropy(g) + g.mean.sum();
}

/// Ground-truth field of positive measurements over a grid.
class FieldMap {
 public:
  FieldMap(GridDomain domain, std::vector<double> values)
      : domain_(domain), values_(std::move(values)) {
    if (static_cast<int>(values_.size()) != domain_.size()) {
      throw InvalidArgument("field does not cover the domain");
    }
  }

  const GridDomain& domain() const { return domain_; }
  double at(Cell c) const { return values_.at(static_cast<std::size_t>(domain_.index(c))); }
  double log_at(Cell c) const { return std::log(at(c)); }
  const std::vector<double>& values() const { return values_; }

  double mean() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s / static_cast<double>(values_.size());
  }

  friend bool operator==(const FieldMap&, const FieldMap&) = default;

 private:
  GridDomain domain_;
  std::vector<double> values_;
};

/// Draws log-Gaussian fields from the joint prior over every cell. The
/// factorization is computed once so repeated draws are cheap.
class FieldSampler {
 public:
  FieldSampler(const Hyperparams& h, const GridDomain& domain) : h_(h), domain_(domain) {
    h.validate();
    const auto cells = domain.cells();
    Eigen::MatrixXd cov = cross_covariance(cells, cells, h);
    cov.diagonal().array() += h.jitter();
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw DegenerateCovariance("field covariance is not positive definite");
    }
    factor_ = llt.matrixL();
  }

  Eigen::VectorXd sample_log(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd w(factor_.rows());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = normal(rng);
    Eigen::VectorXd z = factor_.triangularView<Eigen::Lower>() * w;
    z.array() += h_.mean;
    return z;
  }

  FieldMap sample(std::uint64_t seed) const {
    const Eigen::VectorXd z = sample_log(seed);
    std::vector<double> y(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) y[static_cast<std::size_t>(i)] = std::exp(z(i));
    return FieldMap(domain_, std::move(y));
  }

 private:
  Hyperparams h_;
  GridDomain domain_;
  Eigen::MatrixXd factor_;
};

inline FieldMap sample_field(const Hyperparams& h, const GridDomain& domain, std::uint64_t seed) {
  return FieldSampler(h, domain).sample(seed);
}

/// Lognormal posterior mean exp(mu + sigma^2 / 2) of the measurement at `x`.
inline double lognormal_predictor(const PosteriorData& d, Cell x, const Hyperparams& h) {
  const Cell targets[] = {x};
  const auto g = posterior(d, targets, h);
  return std::exp(g.mean(0) + 0.5 * g.covariance(0, 0));
}

/// Candidate values searched by `fit_hyperparams`.
struct HyperparamGrid {
  std::vector<double> signal_variances;
  std::vector<double> length_scales;
  std::vector<double> noise_variances;

  static std::vector<double> log_spaced(double lo, double hi, int points) {
    std::vector<double> out;
    if (points == 1) return {lo};
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (int i = 0; i < points; ++i) out.push_back(std::exp(a + (b - a) * i / (points - 1)));
    return out;
  }

  /// Grid scaled to the sample variance of the data and the domain extent.
  static HyperparamGrid defaults(const PosteriorData& obs, const GridDomain& domain,
                                 int points = 20) {
    double mean = 0.0;
    for (double z : obs.log_measurements()) mean += z;
    mean /= static_cast<double>(obs.size());
    double var = 0.0;
    for (double z : obs.log_measurements()) var += (z - mean) * (z - mean);
    var /= static_cast<double>(obs.size());
    const double scale = std::max(var, 1e-8);
    const double extent = static_cast<double>(std::max(domain.rows(), domain.cols()));
    return {log_spaced(0.1 * scale, 10.0 * scale, points), log_spaced(0.3, extent, points),
            log_spaced(1e-4 * scale, scale, points)};
  }
};

/// Gaussian log marginal likelihood of the log-measurements in `obs`.
inline double log_marginal_likelihood(const PosteriorData& obs, const Hyperparams& h) {
  const auto& locs = obs.locations();
  Eigen::MatrixXd gram = cross_covariance(locs, locs, h);
  gram.diagonal().array() += h.jitter();
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const auto n = static_cast<Eigen::Index>(locs.size());
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r(i) = obs.log_measurements()[static_cast<std::size_t>(i)] - h.mean;
  const Eigen::VectorXd beta = llt.matrixL().solve(r);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
  return -0.5 * beta.squaredNorm() - 0.5 * logdet -
         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

/// Maximum-likelihood hyperparameters by exhaustive grid search, the mean
/// fixed at the sample mean. Ties keep the first candidate in grid order.
inline Hyperparams fit_hyperparams(const PosteriorData& obs, const GridDomain& domain,
                                   const HyperparamGrid& grid) {
  if (obs.size() < 5) throw InsufficientData("hyperparameter fit needs at least 5 observations");
  if (grid.signal_variances.empty() || grid.length_scales.empty() ||
      grid.noise_variances.empty()) {
    throw InvalidArgument("empty hyperparameter grid");
  }
  (void)domain;
  double mean = 0.0;
  for (double z : obs.log_measurements()) mean += z;
  mean /= static_cast<double>(obs.size());

  Hyperparams best{mean, grid.signal_variances.front(), grid.length_scales.front(),
                   grid.noise_variances.front()};
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double sv : grid.signal_variances) {
    for (double ls : grid.length_scales) {
      for (double nv : grid.noise_variances) {
        const Hyperparams h{mean, sv, ls, nv};
        const double ll = log_marginal_likelihood(obs, h);
        if (ll > best_ll) {
          best_ll = ll;
          best = h;
        }
      }
    }
  }
  return best;
}

inline Hyperparams fit_hyperparams(const PosteriorData& obs, const GridDomain& domain) {
  if (obs.size() < 5) throw InsufficientData("hyperparameter fit needs at least 5 observations");
  return fit_hyperparams(obs, domain, HyperparamGrid::defaults(obs, domain));
}

}  // namespace imasp
