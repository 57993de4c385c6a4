#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stylo/backbone.hpp"
#include "stylo/batching.hpp"
#include "stylo/recurrent_head.hpp"

namespace stylo {

// N x K authorship embeddings; row i belongs to author_ids[i].
struct EmbeddingMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> author_ids;
};

// Caches per-row activations so a later backward pass can run BPTT.
struct EmbedCache {
  std::vector<HeadCache> rows;
};

namespace detail {
inline void check_widths(const Backbone& backbone, const RecurrentHead& head) {
  if (backbone.width() != head.input_dim()) {
    throw std::invalid_argument("dimension mismatch: backbone width " +
                                std::to_string(backbone.width()) + " vs head K=" +
                                std::to_string(head.input_dim()));
  }
}
}  // namespace detail

// Frozen backbone token embeddings reduced by the recurrent head, one row per
// sequence. Only the unpadded prefix of each row is processed.
inline EmbeddingMatrix embed_batch(const Backbone& backbone, const RecurrentHead& head,
                                   const ChunkBatch& batch, EmbedCache* cache = nullptr) {
  detail::check_widths(backbone, head);
  const auto token_mats = backbone.token_embeddings(batch);

  EmbeddingMatrix out;
  out.values.resize(batch.rows(), head.output_dim());
  out.author_ids = batch.author_ids;
  if (cache) cache->rows.resize(static_cast<std::size_t>(batch.rows()));

  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    HeadCache* row_cache = cache ? &cache->rows[static_cast<std::size_t>(i)] : nullptr;
    out.values.row(i) =
        head.embed(token_mats[static_cast<std::size_t>(i)], row_cache).transpose();
  }
  return out;
}

// Accumulates head gradients for the whole batch given d(loss)/d(embeddings).
inline void embed_batch_backward(const RecurrentHead& head, const EmbedCache& cache,
                                 const Eigen::MatrixXd& d_values, HeadGrads& grads) {
  if (static_cast<std::size_t>(d_values.rows()) != cache.rows.size()) {
    throw std::invalid_argument("embed_batch_backward: cache/gradient row mismatch");
  }
  for (Eigen::Index i = 0; i < d_values.rows(); ++i) {
    head_backward(head, cache.rows[static_cast<std::size_t>(i)],
                  d_values.row(i).transpose(), grads);
  }
}

// Mean of the backbone's token embeddings over non-padding positions; the
// untrained comparison embedder.
inline EmbeddingMatrix baseline_embed(const Backbone& backbone, const ChunkBatch& batch) {
  const auto token_mats = backbone.token_embeddings(batch);

  EmbeddingMatrix out;
  out.values.resize(batch.rows(), backbone.width());
  out.author_ids = batch.author_ids;
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    const auto& tokens = token_mats[static_cast<std::size_t>(i)];
    if (tokens.rows() == 0) {
      throw std::runtime_error("baseline_embed: row " + std::to_string(i) +
                               " has no unmasked tokens");
    }
    out.values.row(i) = tokens.colwise().mean();
  }
  return out;
}

}  // namespace stylo
