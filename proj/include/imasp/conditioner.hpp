#pragma once

#include <cmath>
#include <cstdlib>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "imasp/errors.hpp"
#include "imasp/field_model.hpp"

namespace imasp {

/// Kernel values tabulated by row/column offset. Lookups return exactly what
/// `covariance()` computes.
class KernelTable {
 public:
  KernelTable(const Hyperparams& h, const GridDomain& domain)
      : h_(h), rows_(domain.rows()), cols_(domain.cols()) {
    values_.resize(static_cast<std::size_t>(rows_ * cols_));
    for (int dr = 0; dr < rows_; ++dr) {
      for (int dc = 0; dc < cols_; ++dc) {
        const double d2 = static_cast<double>(dr * dr + dc * dc);
        values_[static_cast<std::size_t>(dr * cols_ + dc)] =
            h.signal_variance * std::exp(-d2 / (2.0 * h.length_scale * h.length_scale));
      }
    }
  }

  double operator()(Cell a, Cell b) const {
    const int dr = std::abs(a.row - b.row);
    const int dc = std::abs(a.col - b.col);
    if (dr >= rows_ || dc >= cols_) return covariance(a, b, h_);
    const double k = values_[static_cast<std::size_t>(dr * cols_ + dc)];
    return a == b ? k + h_.noise_variance : k;
  }

 private:
  Hyperparams h_;
  int rows_;
  int cols_;
  std::vector<double> values_;
};

/// Incrementally maintained Cholesky factor of the Gram matrix of a history,
/// plus the whitened residual vector. Supports push/pop of observations in
/// O(n^2) and single-cell conditionals in O(n^2); the results agree with
/// `posterior()` computed from scratch.
class Conditioner {
 public:
  /// Whitened covariance of a candidate cell against the current history.
  struct Candidate {
    Cell cell;
    std::vector<double> whitened;  // L^{-1} k(history, cell)
    double mean = 0.0;             // posterior mean of the measurement
    double variance = 0.0;         // posterior variance of the measurement
    double pivot = 0.0;            // new Cholesky diagonal if pushed
  };

  explicit Conditioner(const Hyperparams& h, std::shared_ptr<const KernelTable> table = nullptr)
      : h_(h), table_(std::move(table)) {}

  Conditioner(const Hyperparams& h, const PosteriorData& d,
              std::shared_ptr<const KernelTable> table = nullptr)
      : h_(h), table_(std::move(table)) {
    factor_.reserve(d.size() * (d.size() + 1) / 2 + 64);
    for (std::size_t i = 0; i < d.size(); ++i) push(d.locations()[i], d.log_measurements()[i]);
  }

  const Hyperparams& hyperparams() const { return h_; }
  std::size_t size() const { return cells_.size(); }
  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<double>& values() const { return values_; }

  Candidate prepare(Cell c) const {
    Candidate out;
    out.cell = c;
    const std::size_t n = cells_.size();
    out.whitened.resize(n);
    double ss = 0.0;
    double proj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &factor_[i * (i + 1) / 2];
      double acc = kernel(cells_[i], c);
      for (std::size_t j = 0; j < i; ++j) acc -= row[j] * out.whitened[j];
      const double w = acc / row[i];
      out.whitened[i] = w;
      ss += w * w;
      proj += w * beta_[i];
    }
    out.mean = h_.mean + proj;
    out.variance = h_.prior_variance() - ss;
    out.pivot = out.variance;
    return out;
  }

  /// Posterior mean and variance of one cell.
  std::pair<double, double> moments(Cell c) const {
    const auto cand = prepare(c);
    return {cand.mean, cand.variance};
  }

  void push(const Candidate& cand, double z) {
    if (!(cand.pivot > 0.0)) throw SingularGram("observation adds a singular pivot");
    const double pivot = std::sqrt(cand.pivot);
    factor_.insert(factor_.end(), cand.whitened.begin(), cand.whitened.end());
    factor_.push_back(pivot);
    double proj = 0.0;
    for (std::size_t i = 0; i < cand.whitened.size(); ++i) proj += cand.whitened[i] * beta_[i];
    beta_.push_back((z - h_.mean - proj) / pivot);
    cells_.push_back(cand.cell);
    values_.push_back(z);
  }

  void push(Cell c, double z) { push(prepare(c), z); }

  void pop() {
    const std::size_t n = cells_.size();
    if (n == 0) throw InvalidArgument("pop on empty conditioner");
    factor_.resize((n - 1) * n / 2);
    beta_.pop_back();
    cells_.pop_back();
    values_.pop_back();
  }

  /// Rate at which the posterior mean of `cand`'s cell moves with the value
  /// of the most recently pushed observation.
  double last_value_sensitivity(const Candidate& cand) const {
    const std::size_t n = cells_.size();
    if (n == 0) return 0.0;
    return cand.whitened[n - 1] / factor_[(n - 1) * n / 2 + (n - 1)];
  }

  /// K^{-1}(z - mu); posterior means then cost O(n) per cell.
  std::vector<double> weights() const {
    const std::size_t n = cells_.size();
    std::vector<double> alpha(beta_);
    for (std::size_t ii = n; ii-- > 0;) {
      double acc = alpha[ii];
      for (std::size_t j = ii + 1; j < n; ++j) acc -= factor_[j * (j + 1) / 2 + ii] * alpha[j];
      alpha[ii] = acc / factor_[ii * (ii + 1) / 2 + ii];
    }
    return alpha;
  }

  double mean_with_weights(Cell c, std::span<const double> alpha) const {
    double m = h_.mean;
    for (std::size_t i = 0; i < cells_.size(); ++i) m += kernel(cells_[i], c) * alpha[i];
    return m;
  }

  /// Joint posterior of several cells.
  PosteriorGaussian joint(std::span<const Cell> targets) const {
    const auto m = static_cast<Eigen::Index>(targets.size());
    const std::size_t n = cells_.size();
    Eigen::MatrixXd w(static_cast<Eigen::Index>(n), m);
    PosteriorGaussian g;
    g.mean.resize(m);
    for (Eigen::Index t = 0; t < m; ++t) {
      const auto cand = prepare(targets[static_cast<std::size_t>(t)]);
      for (std::size_t i = 0; i < n; ++i) w(static_cast<Eigen::Index>(i), t) = cand.whitened[i];
      g.mean(t) = cand.mean;
    }
    g.covariance = cross_covariance(targets, targets, h_);
    g.covariance.diagonal().array() += h_.jitter();
    if (n > 0) g.covariance -= w.transpose() * w;
    return g;
  }

 private:
  double kernel(Cell a, Cell b) const { return table_ ? (*table_)(a, b) : covariance(a, b, h_); }

  Hyperparams h_;
  std::shared_ptr<const KernelTable> table_;
  std::vector<Cell> cells_;
  std::vector<double> values_;
  std::vector<double> factor_;  // packed lower-triangular rows
  std::vector<double> beta_;    // L^{-1}(z - mu)
};

}  // namespace imasp
