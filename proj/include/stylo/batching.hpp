#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "stylo/corpus.hpp"
#include "stylo/rng.hpp"

namespace stylo {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// N token sequences from N distinct authors, padded to a fixed length.
// Padding sits only at the tail, so the mask is a true-prefix per row.
struct ChunkBatch {
  Eigen::MatrixXi token_ids;            // N x L
  BoolMatrix mask;                      // N x L, true = real token
  std::vector<std::string> author_ids;  // length N

  Eigen::Index rows() const { return token_ids.rows(); }
  Eigen::Index capacity() const { return token_ids.cols(); }

  Eigen::Index length(Eigen::Index row) const {
    Eigen::Index n = 0;
    while (n < mask.cols() && mask(row, n)) ++n;
    return n;
  }

  std::span<const TokenId> row_tokens(Eigen::Index row) const {
    // Eigen defaults to column-major; keep an explicit row copy out of the
    // hot path by storing row-major.
    return {row_data_.data() + static_cast<std::size_t>(row) * row_stride_,
            static_cast<std::size_t>(length(row))};
  }

  static ChunkBatch from_rows(const std::vector<std::string>& authors,
                              const std::vector<std::span<const TokenId>>& rows,
                              Eigen::Index seq_len, TokenId pad_id) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    if (authors.size() != rows.size()) {
      throw std::invalid_argument("ChunkBatch: authors and rows differ in length");
    }
    std::unordered_set<std::string> seen;
    for (const auto& author : authors) {
      if (!seen.insert(author).second) {
        throw std::invalid_argument("ChunkBatch: repeated author " + author);
      }
    }

    ChunkBatch batch;
    batch.token_ids = Eigen::MatrixXi::Constant(n, seq_len, pad_id);
    batch.mask = BoolMatrix::Constant(n, seq_len, false);
    batch.author_ids = authors;
    batch.row_data_.assign(static_cast<std::size_t>(n * seq_len), pad_id);
    batch.row_stride_ = static_cast<std::size_t>(seq_len);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      if (row.empty()) throw std::invalid_argument("ChunkBatch: empty row");
      if (static_cast<Eigen::Index>(row.size()) > seq_len) {
        throw std::invalid_argument("ChunkBatch: chunk longer than sequence capacity");
      }
      for (std::size_t t = 0; t < row.size(); ++t) {
        batch.token_ids(i, static_cast<Eigen::Index>(t)) = row[t];
        batch.mask(i, static_cast<Eigen::Index>(t)) = true;
        batch.row_data_[static_cast<std::size_t>(i) * batch.row_stride_ + t] = row[t];
      }
    }
    return batch;
  }

 private:
  std::vector<TokenId> row_data_;
  std::size_t row_stride_ = 0;
};

// Anchor/positive pair: same authors in the same order, and for each author
// the anchor chunk differs from the positive chunk.
struct PairBatch {
  ChunkBatch anchors;
  ChunkBatch positives;
};

// Samples N distinct authors without replacement and, per author, two
// distinct chunks uniformly at random (anchor/positive order included).
inline PairBatch sample_pair_batch(const std::vector<AuthorPool>& pools, std::size_t n,
                                   Eigen::Index seq_len, TokenId pad_id,
                                   std::uint64_t seed) {
  if (pools.size() < n) {
    throw std::runtime_error("insufficient authors: need " + std::to_string(n) + ", have " +
                             std::to_string(pools.size()));
  }
  if (n == 0) throw std::invalid_argument("sample_pair_batch: batch size must be positive");

  Rng rng(seed);
  const auto author_idx = rng.sample_indices(pools.size(), n);

  std::vector<std::string> authors;
  std::vector<std::span<const TokenId>> anchor_rows, positive_rows;
  authors.reserve(n);
  anchor_rows.reserve(n);
  positive_rows.reserve(n);
  for (std::size_t idx : author_idx) {
    const AuthorPool& pool = pools[idx];
    if (pool.chunks.size() < 2) {
      throw std::runtime_error("author " + pool.author_id + " has fewer than 2 chunks");
    }
    const std::size_t a = rng.below(pool.chunks.size());
    std::size_t b = rng.below(pool.chunks.size() - 1);
    if (b >= a) ++b;
    authors.push_back(pool.author_id);
    anchor_rows.emplace_back(pool.chunks[a]);
    positive_rows.emplace_back(pool.chunks[b]);
  }

  PairBatch pair;
  pair.anchors = ChunkBatch::from_rows(authors, anchor_rows, seq_len, pad_id);
  pair.positives = ChunkBatch::from_rows(authors, positive_rows, seq_len, pad_id);
  return pair;
}

// Yields exactly `steps` batches; the per-step seed is derived from the base
// seed and the step index, so any step can be re-created independently.
class EpochIterator {
 public:
  EpochIterator(const std::vector<AuthorPool>& pools, std::size_t batch_size,
                Eigen::Index seq_len, TokenId pad_id, std::size_t steps,
                std::uint64_t seed, std::size_t start_step = 0)
      : pools_(&pools),
        batch_size_(batch_size),
        seq_len_(seq_len),
        pad_id_(pad_id),
        steps_(steps),
        seed_(seed),
        step_(start_step) {}

  bool has_next() const { return step_ < steps_; }
  std::size_t step() const { return step_; }

  PairBatch next() {
    if (!has_next()) throw std::logic_error("EpochIterator exhausted");
    const std::uint64_t step_seed = derive_seed(seed_, "batch", step_);
    ++step_;
    return sample_pair_batch(*pools_, batch_size_, seq_len_, pad_id_, step_seed);
  }

 private:
  const std::vector<AuthorPool>* pools_;
  std::size_t batch_size_;
  Eigen::Index seq_len_;
  TokenId pad_id_;
  std::size_t steps_;
  std::uint64_t seed_;
  std::size_t step_;
};

}  // namespace stylo
