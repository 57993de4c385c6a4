#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "stylo/model.hpp"

namespace stylo {

// Learnable temperature, parameterized on the log scale so tau stays
// positive. tau is clamped to 100 during training.
class TemperatureParam {
 public:
  static constexpr double kMaxTau = 100.0;

  explicit TemperatureParam(double initial_tau = std::exp(7e-2))
      : log_scale_(std::log(initial_tau)) {
    if (!(initial_tau > 0.0)) {
      throw std::invalid_argument("TemperatureParam: tau must be positive");
    }
    clamp();
  }

  double tau() const { return std::exp(log_scale_); }
  double log_scale() const { return log_scale_; }

  void set_log_scale(double value) {
    log_scale_ = value;
    clamp();
  }

  void clamp() {
    const double cap = std::log(kMaxTau);
    if (log_scale_ > cap) log_scale_ = cap;
  }

 private:
  double log_scale_;
};

// Temperature-scaled cosine similarities: X[i][j] = tau * cos(E_i, E'_j).
struct SimilarityMatrix {
  Eigen::MatrixXd values;
};

// Row-normalized inputs kept around for the backward pass.
struct SimilarityCache {
  Eigen::MatrixXd unit_rows;        // E, row-normalized
  Eigen::MatrixXd unit_rows_prime;  // E', row-normalized
  Eigen::VectorXd norms;
  Eigen::VectorXd norms_prime;
  double tau = 1.0;
};

namespace detail {

inline Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m, Eigen::VectorXd& norms,
                                      const std::vector<std::string>& who) {
  norms = m.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > 0.0)) {
      const std::string label =
          who.empty() ? std::to_string(i) : who[static_cast<std::size_t>(i)];
      throw std::runtime_error("degenerate embedding: zero-norm row for " + label);
    }
  }
  return norms.cwiseInverse().asDiagonal() * m;
}

}  // namespace detail

// Both matrices are row-normalized, multiplied, and scaled by tau, which
// makes every entry a cosine similarity times the temperature.
inline SimilarityMatrix similarity_matrix(const EmbeddingMatrix& e,
                                          const EmbeddingMatrix& e_prime,
                                          const TemperatureParam& temp,
                                          SimilarityCache* cache = nullptr) {
  if (e.values.rows() != e_prime.values.rows() || e.values.cols() != e_prime.values.cols()) {
    throw std::invalid_argument("similarity_matrix: embedding shapes differ");
  }
  Eigen::VectorXd norms, norms_prime;
  const Eigen::MatrixXd u = detail::normalize_rows(e.values, norms, e.author_ids);
  const Eigen::MatrixXd v = detail::normalize_rows(e_prime.values, norms_prime,
                                                   e_prime.author_ids);
  SimilarityMatrix x;
  x.values = temp.tau() * (u * v.transpose());
  if (cache) {
    cache->unit_rows = u;
    cache->unit_rows_prime = v;
    cache->norms = norms;
    cache->norms_prime = norms_prime;
    cache->tau = temp.tau();
  }
  return x;
}

namespace detail {

inline void check_square_finite(const Eigen::MatrixXd& x, const char* where) {
  if (x.rows() != x.cols()) {
    throw std::invalid_argument(std::string(where) + ": matrix is not square");
  }
  if (x.rows() == 0) throw std::invalid_argument(std::string(where) + ": empty matrix");
  if (!x.allFinite()) {
    throw std::invalid_argument(std::string(where) + ": non-finite entries");
  }
}

}  // namespace detail

// Row-wise softmax cross-entropy against the diagonal, averaged over rows.
// Uses max-subtraction so large temperatures cannot overflow.
inline double nt_xent(const SimilarityMatrix& x) {
  detail::check_square_finite(x.values, "nt_xent");
  const Eigen::Index n = x.values.rows();
  double total = 0.0;
  for (Eigen::Index row = 0; row < n; ++row) {
    const double row_max = x.values.row(row).maxCoeff();
    const double lse =
        std::log((x.values.row(row).array() - row_max).exp().sum()) + row_max;
    total += lse - x.values(row, row);
  }
  return total / static_cast<double>(n);
}

// Symmetric InfoNCE: average of the row-wise and column-wise NT-Xent terms.
inline double info_nce(const SimilarityMatrix& x) {
  SimilarityMatrix xt{x.values.transpose()};
  return 0.5 * (nt_xent(x) + nt_xent(xt));
}

// Loss plus d(loss)/dX. The gradient combines the row softmax, the column
// softmax, and the diagonal target terms.
inline double info_nce_with_grad(const SimilarityMatrix& x, Eigen::MatrixXd& d_x) {
  detail::check_square_finite(x.values, "info_nce");
  const Eigen::Index n = x.values.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  d_x = Eigen::MatrixXd::Zero(n, n);
  double total = 0.0;
  for (Eigen::Index row = 0; row < n; ++row) {
    const double row_max = x.values.row(row).maxCoeff();
    const Eigen::ArrayXd shifted = (x.values.row(row).array() - row_max).exp();
    const double denom = shifted.sum();
    total += std::log(denom) + row_max - x.values(row, row);
    d_x.row(row) += (0.5 * inv_n / denom) * shifted.matrix().transpose();
  }
  for (Eigen::Index col = 0; col < n; ++col) {
    const double col_max = x.values.col(col).maxCoeff();
    const Eigen::ArrayXd shifted = (x.values.col(col).array() - col_max).exp();
    const double denom = shifted.sum();
    total += std::log(denom) + col_max - x.values(col, col);
    d_x.col(col) += (0.5 * inv_n / denom) * shifted.matrix();
  }
  d_x.diagonal().array() -= inv_n;
  return 0.5 * inv_n * total;
}

// Propagates d(loss)/dX back to the raw embeddings and the temperature's
// log-scale parameter.
inline void similarity_backward(const SimilarityCache& cache, const Eigen::MatrixXd& d_x,
                                Eigen::MatrixXd& d_e, Eigen::MatrixXd& d_e_prime,
                                double& d_log_scale) {
  const Eigen::MatrixXd cosines = cache.unit_rows * cache.unit_rows_prime.transpose();
  const double d_tau = (d_x.array() * cosines.array()).sum();
  d_log_scale = d_tau * cache.tau;  // tau = exp(log_scale)

  const Eigen::MatrixXd d_u = cache.tau * (d_x * cache.unit_rows_prime);
  const Eigen::MatrixXd d_v = cache.tau * (d_x.transpose() * cache.unit_rows);

  // Through row normalization: de = (du - u * (u . du)) / ||e||.
  d_e.resize(d_u.rows(), d_u.cols());
  d_e_prime.resize(d_v.rows(), d_v.cols());
  for (Eigen::Index i = 0; i < d_u.rows(); ++i) {
    const double dot = cache.unit_rows.row(i).dot(d_u.row(i));
    d_e.row(i) = (d_u.row(i) - dot * cache.unit_rows.row(i)) / cache.norms(i);
  }
  for (Eigen::Index i = 0; i < d_v.rows(); ++i) {
    const double dot = cache.unit_rows_prime.row(i).dot(d_v.row(i));
    d_e_prime.row(i) =
        (d_v.row(i) - dot * cache.unit_rows_prime.row(i)) / cache.norms_prime(i);
  }
}

}  // namespace stylo
