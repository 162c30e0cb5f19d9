#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "imasp/errors.hpp"

namespace imasp {

namespace stdnormal {

inline double pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }
inline double cdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }
inline double upper_tail(double u) { return 0.5 * std::erfc(u / std::numbers::sqrt2); }

/// P(a <= U <= b) without cancellation in either tail.
inline double interval_probability(double a, double b) {
  if (a >= 0.0) return upper_tail(a) - upper_tail(b);
  if (b <= 0.0) return cdf(b) - cdf(a);
  return 1.0 - cdf(a) - upper_tail(b);
}

inline double quantile(double p) {
  static const boost::math::normal_distribution<double> n01(0.0, 1.0);
  if (p <= 0.5) return boost::math::quantile(n01, p);
  return -boost::math::quantile(n01, 1.0 - p);
}

}  // namespace stdnormal

/// Equal-probability partition of a Normal(mean, variance) truncated to
/// [mean - m sigma, mean + m sigma].
struct Partition {
  std::vector<double> boundaries;  // nu + 1 strictly increasing values
  double mean = 0.0;
  double variance = 1.0;
  double truncation = 4.0;

  int intervals() const { return static_cast<int>(boundaries.size()) - 1; }
  double sd() const { return std::sqrt(variance); }

  /// Probability mass of the untruncated outcome lying outside the support.
  double truncated_mass() const { return 2.0 * stdnormal::upper_tail(truncation); }
};

inline Partition make_partition(double mean, double variance, int intervals, double truncation) {
  if (intervals < 1) throw InvalidArgument("partition needs at least one interval");
  if (!(truncation > 0.0)) throw InvalidArgument("truncation width must be positive");
  if (!(variance > 0.0)) throw InvalidArgument("outcome variance must be positive");
  Partition p;
  p.mean = mean;
  p.variance = variance;
  p.truncation = truncation;
  const double sd = std::sqrt(variance);
  const double tail = stdnormal::upper_tail(truncation);
  const double kept = 1.0 - 2.0 * tail;
  std::vector<double> u(static_cast<std::size_t>(intervals) + 1);
  u.front() = -truncation;
  u.back() = truncation;
  for (int j = 1; j < intervals; ++j) {
    // Quantiles above the median mirror those below, keeping the partition
    // exactly symmetric.
    if (2 * j < intervals) {
      u[static_cast<std::size_t>(j)] = stdnormal::quantile(tail + kept * j / intervals);
    } else if (2 * j == intervals) {
      u[static_cast<std::size_t>(j)] = 0.0;
    }
  }
  for (int j = 1; j < intervals; ++j) {
    if (2 * j > intervals) u[static_cast<std::size_t>(j)] = -u[static_cast<std::size_t>(intervals - j)];
  }
  p.boundaries.resize(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) p.boundaries[j] = mean + sd * u[j];
  return p;
}

struct WeightedPoints {
  std::vector<double> weights;
  std::vector<double> points;
};

/// Interval probabilities and conditional means (lower, Jensen side).
inline WeightedPoints jensen_points(const Partition& p) {
  const int nu = p.intervals();
  const double sd = p.sd();
  WeightedPoints out;
  out.weights.resize(static_cast<std::size_t>(nu));
  out.points.resize(static_cast<std::size_t>(nu));
  double total = 0.0;
  for (int j = 0; j < nu; ++j) {
    const double a = (p.boundaries[static_cast<std::size_t>(j)] - p.mean) / sd;
    const double b = (p.boundaries[static_cast<std::size_t>(j) + 1] - p.mean) / sd;
    const double mass = stdnormal::interval_probability(a, b);
    if (!(mass >= 1e-300)) throw VanishingInterval("outcome interval without probability mass");
    double c = (stdnormal::pdf(a) - stdnormal::pdf(b)) / mass;
    c = std::clamp(c, std::nextafter(a, b), std::nextafter(b, a));
    out.weights[static_cast<std::size_t>(j)] = mass;
    out.points[static_cast<std::size_t>(j)] = p.mean + sd * c;
    total += mass;
  }
  for (double& w : out.weights) w /= total;
  return out;
}

/// Edmundson-Madansky weights on the partition boundaries (upper side).
inline WeightedPoints em_points(const Partition& p, const WeightedPoints& jensen) {
  const int nu = p.intervals();
  const auto& zb = p.boundaries;
  // jensen quantities indexed 1..nu, with zero sentinels at 0 and nu + 1
  auto pl = [&](int j) { return (j < 1 || j > nu) ? 0.0 : jensen.weights[static_cast<std::size_t>(j - 1)]; };
  auto zl = [&](int j) { return (j < 1 || j > nu) ? 0.0 : jensen.points[static_cast<std::size_t>(j - 1)]; };
  WeightedPoints out;
  out.points = zb;
  out.weights.resize(static_cast<std::size_t>(nu) + 1);
  double total = 0.0;
  for (int j = 0; j <= nu; ++j) {
    double w = 0.0;
    if (j >= 1) {
      const double lo = zb[static_cast<std::size_t>(j - 1)];
      const double hi = zb[static_cast<std::size_t>(j)];
      w += pl(j) * (zl(j) - lo) / (hi - lo);
    }
    if (j + 1 <= nu) {
      const double lo = zb[static_cast<std::size_t>(j)];
      const double hi = zb[static_cast<std::size_t>(j + 1)];
      w += pl(j + 1) * (hi - zl(j + 1)) / (hi - lo);
    }
    out.weights[static_cast<std::size_t>(j)] = w;
    total += w;
  }
  for (double& w : out.weights) w /= total;
  return out;
}

inline WeightedPoints em_points(const Partition& p) { return em_points(p, jensen_points(p)); }

struct OutcomePoints {
  std::vector<double> jensen_weights;
  std::vector<double> jensen_points;
  std::vector<double> em_weights;
  std::vector<double> em_points;
};

inline OutcomePoints outcome_points(const Partition& p) {
  auto lower = jensen_points(p);
  auto upper = em_points(p, lower);
  return {std::move(lower.weights), std::move(lower.points), std::move(upper.weights),
          std::move(upper.points)};
}

/// Outcome points of the standard normal; the points of Normal(mean, var)
/// are mean + sd * offset with identical weights, so planners scale one
/// precomputed set instead of rebuilding partitions.
struct StandardOutcomes {
  int intervals = 1;
  double truncation = 4.0;
  OutcomePoints standard;

  static StandardOutcomes make(int intervals, double truncation) {
    return {intervals, truncation, outcome_points(make_partition(0.0, 1.0, intervals, truncation))};
  }

  const std::vector<double>& weights(bool upper) const {
    return upper ? standard.em_weights : standard.jensen_weights;
  }
  const std::vector<double>& offsets(bool upper) const {
    return upper ? standard.em_points : standard.jensen_points;
  }

  /// Largest |offset| among the Jensen points.
  double max_jensen_offset() const {
    double m = 0.0;
    for (double c : standard.jensen_points) m = std::max(m, std::abs(c));
    return m;
  }
};

}  // namespace imasp
