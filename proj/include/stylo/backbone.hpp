#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stylo/batching.hpp"
#include "stylo/rng.hpp"
#include "stylo/tokenizer.hpp"

namespace stylo {

// Frozen per-token encoder. Outputs never change during training: identical
// inputs must produce identical (T, K) matrices, where T is the unpadded
// prefix length of a row.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual Eigen::Index width() const = 0;    // K
  virtual Eigen::Index max_len() const = 0;  // L
  virtual std::string id() const = 0;

  // Token embeddings for one sequence, rows = positions.
  virtual Eigen::MatrixXd token_embeddings(std::span<const TokenId> ids) const = 0;

  // Batch hook; remote transports override this to do one round trip.
  virtual std::vector<Eigen::MatrixXd> token_embeddings(const ChunkBatch& batch) const {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(batch.rows()));
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
      out.push_back(token_embeddings(batch.row_tokens(i)));
    }
    return out;
  }
};

// Deterministic stand-in for a pretrained transformer: every token id maps to
// a fixed pseudo-random unit-norm K-vector derived from (seed, id). Purely
// functional, so it is trivially frozen and thread-safe.
class HashBackbone final : public Backbone {
 public:
  HashBackbone(std::uint64_t seed, Eigen::Index width, Eigen::Index max_len)
      : seed_(seed), width_(width), max_len_(max_len) {
    if (width < 1) throw std::invalid_argument("HashBackbone: width must be positive");
  }

  Eigen::Index width() const override { return width_; }
  Eigen::Index max_len() const override { return max_len_; }
  std::string id() const override { return "hash:" + std::to_string(seed_); }

  Eigen::VectorXd token_vector(TokenId id) const {
    Rng rng(derive_seed(seed_, "token", static_cast<std::uint64_t>(id)));
    Eigen::VectorXd v(width_);
    for (Eigen::Index k = 0; k < width_; ++k) v(k) = rng.gaussian();
    const double norm = v.norm();
    if (norm < 1e-12) {
      v.setZero();
      v(0) = 1.0;
      return v;
    }
    return v / norm;
  }

  Eigen::MatrixXd token_embeddings(std::span<const TokenId> ids) const override {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), width_);
    for (std::size_t t = 0; t < ids.size(); ++t) {
      out.row(static_cast<Eigen::Index>(t)) = token_vector(ids[t]).transpose();
    }
    return out;
  }

  using Backbone::token_embeddings;

 private:
  std::uint64_t seed_;
  Eigen::Index width_;
  Eigen::Index max_len_;
};

}  // namespace stylo
