#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "stylo/rng.hpp"

namespace stylo {

namespace detail {
inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) {
  return 1.0 / (1.0 + (-x).exp());
}
}  // namespace detail

// Per-sequence activations recorded during a forward pass, consumed by BPTT.
struct LstmCache {
  Eigen::MatrixXd inputs;                          // T x K, processing order
  Eigen::MatrixXd gate_i, gate_f, gate_g, gate_o;  // H x T
  Eigen::MatrixXd cell;                            // H x T
  Eigen::MatrixXd tanh_cell;                       // H x T
  Eigen::MatrixXd hidden;                          // H x T
};

// One LSTM direction. Gate rows are stacked [input, forget, cell, output].
class LstmDirection {
 public:
  Eigen::MatrixXd w_in;   // 4H x K
  Eigen::MatrixXd w_rec;  // 4H x H
  Eigen::MatrixXd bias;   // 4H x 1

  void init(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    w_in.resize(4 * hidden_dim, input_dim);
    w_rec.resize(4 * hidden_dim, hidden_dim);
    bias.resize(4 * hidden_dim, 1);
    for (auto* m : {&w_in, &w_rec, &bias}) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) {
        for (Eigen::Index i = 0; i < m->rows(); ++i) {
          (*m)(i, j) = rng.uniform(-bound, bound);
        }
      }
    }
  }

  Eigen::Index hidden_dim() const { return w_rec.cols(); }

  // x is (T, K) in processing order; returns the final hidden state.
  Eigen::VectorXd forward(const Eigen::MatrixXd& x, LstmCache* cache = nullptr) const {
    const Eigen::Index steps = x.rows();
    const Eigen::Index h_dim = hidden_dim();
    if (steps < 1) throw std::invalid_argument("LstmDirection: empty sequence");

    Eigen::VectorXd h = Eigen::VectorXd::Zero(h_dim);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(h_dim);
    if (cache) {
      cache->inputs = x;
      for (auto* m : {&cache->gate_i, &cache->gate_f, &cache->gate_g, &cache->gate_o,
                      &cache->cell, &cache->tanh_cell, &cache->hidden}) {
        m->resize(h_dim, steps);
      }
    }

    for (Eigen::Index t = 0; t < steps; ++t) {
      const Eigen::VectorXd pre =
          w_in * x.row(t).transpose() + w_rec * h + bias.col(0);
      const Eigen::ArrayXd gi = detail::sigmoid(pre.head(h_dim).array());
      const Eigen::ArrayXd gf = detail::sigmoid(pre.segment(h_dim, h_dim).array());
      const Eigen::ArrayXd gg = pre.segment(2 * h_dim, h_dim).array().tanh();
      const Eigen::ArrayXd go = detail::sigmoid(pre.tail(h_dim).array());

      c = (gf * c.array() + gi * gg).matrix();
      const Eigen::ArrayXd tc = c.array().tanh();
      h = (go * tc).matrix();

      if (cache) {
        cache->gate_i.col(t) = gi.matrix();
        cache->gate_f.col(t) = gf.matrix();
        cache->gate_g.col(t) = gg.matrix();
        cache->gate_o.col(t) = go.matrix();
        cache->cell.col(t) = c;
        cache->tanh_cell.col(t) = tc.matrix();
        cache->hidden.col(t) = h;
      }
    }
    return h;
  }

  // Backpropagation through time from a gradient on the final hidden state.
  // Parameter gradients accumulate into the g_* matrices.
  void backward(const LstmCache& cache, const Eigen::VectorXd& d_final,
                Eigen::MatrixXd& g_w_in, Eigen::MatrixXd& g_w_rec,
                Eigen::MatrixXd& g_bias) const {
    const Eigen::Index steps = cache.inputs.rows();
    const Eigen::Index h_dim = hidden_dim();

    Eigen::ArrayXd dh = d_final.array();
    Eigen::ArrayXd dc = Eigen::ArrayXd::Zero(h_dim);
    Eigen::VectorXd pre_grad(4 * h_dim);

    for (Eigen::Index t = steps - 1; t >= 0; --t) {
      const Eigen::ArrayXd gi = cache.gate_i.col(t).array();
      const Eigen::ArrayXd gf = cache.gate_f.col(t).array();
      const Eigen::ArrayXd gg = cache.gate_g.col(t).array();
      const Eigen::ArrayXd go = cache.gate_o.col(t).array();
      const Eigen::ArrayXd tc = cache.tanh_cell.col(t).array();

      const Eigen::ArrayXd dct = dc + dh * go * (1.0 - tc * tc);
      const Eigen::ArrayXd c_prev = t > 0 ? cache.cell.col(t - 1).array()
                                          : Eigen::ArrayXd::Zero(h_dim).eval();

      pre_grad.head(h_dim) = (dct * gg * gi * (1.0 - gi)).matrix();
      pre_grad.segment(h_dim, h_dim) = (dct * c_prev * gf * (1.0 - gf)).matrix();
      pre_grad.segment(2 * h_dim, h_dim) = (dct * gi * (1.0 - gg * gg)).matrix();
      pre_grad.tail(h_dim) = (dh * tc * go * (1.0 - go)).matrix();

      g_w_in.noalias() += pre_grad * cache.inputs.row(t);
      if (t > 0) {
        g_w_rec.noalias() += pre_grad * cache.hidden.col(t - 1).transpose();
      }
      g_bias.col(0) += pre_grad;

      dh = (w_rec.transpose() * pre_grad).array();
      dc = dct * gf;
    }
  }
};

struct HeadCache {
  LstmCache forward_dir;
  LstmCache backward_dir;
};

// Bidirectional recurrent reducer: (T, K) token embeddings -> one K-vector.
// Each direction contributes its final hidden state of width K/2; the two are
// concatenated, with no output projection. Only positions present in the
// input (the unpadded prefix) are ever processed.
class RecurrentHead {
 public:
  RecurrentHead() = default;

  explicit RecurrentHead(Eigen::Index input_dim) : input_dim_(input_dim) {
    if (input_dim < 2 || input_dim % 2 != 0) {
      throw std::invalid_argument(
          "RecurrentHead: embedding width must be even and >= 2 (K/2 per direction)");
    }
  }

  void init_params(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "head_init"));
    forward_.init(input_dim_, hidden_dim(), rng);
    backward_.init(input_dim_, hidden_dim(), rng);
  }

  Eigen::Index input_dim() const { return input_dim_; }
  Eigen::Index output_dim() const { return input_dim_; }
  Eigen::Index hidden_dim() const { return input_dim_ / 2; }

  Eigen::VectorXd embed(const Eigen::MatrixXd& tokens, HeadCache* cache = nullptr) const {
    if (tokens.cols() != input_dim_) {
      throw std::invalid_argument("RecurrentHead: token width " +
                                  std::to_string(tokens.cols()) + " does not match K=" +
                                  std::to_string(input_dim_));
    }
    const Eigen::MatrixXd reversed = tokens.colwise().reverse();
    Eigen::VectorXd out(output_dim());
    out.head(hidden_dim()) =
        forward_.forward(tokens, cache ? &cache->forward_dir : nullptr);
    out.tail(hidden_dim()) =
        backward_.forward(reversed, cache ? &cache->backward_dir : nullptr);
    return out;
  }

  LstmDirection& forward_direction() { return forward_; }
  LstmDirection& backward_direction() { return backward_; }
  const LstmDirection& forward_direction() const { return forward_; }
  const LstmDirection& backward_direction() const { return backward_; }

  // Fixed-order named parameter blocks, shared by the optimizer, the
  // checkpoint writer and the gradient checks.
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> parameters() {
    return {
        {"head.forward.w_in", &forward_.w_in},
        {"head.forward.w_rec", &forward_.w_rec},
        {"head.forward.bias", &forward_.bias},
        {"head.backward.w_in", &backward_.w_in},
        {"head.backward.w_rec", &backward_.w_rec},
        {"head.backward.bias", &backward_.bias},
    };
  }

  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> parameters() const {
    return {
        {"head.forward.w_in", &forward_.w_in},
        {"head.forward.w_rec", &forward_.w_rec},
        {"head.forward.bias", &forward_.bias},
        {"head.backward.w_in", &backward_.w_in},
        {"head.backward.w_rec", &backward_.w_rec},
        {"head.backward.bias", &backward_.bias},
    };
  }

 private:
  Eigen::Index input_dim_ = 0;
  LstmDirection forward_;
  LstmDirection backward_;
};

// Gradient accumulator matching RecurrentHead's parameter layout.
struct HeadGrads {
  Eigen::MatrixXd fwd_w_in, fwd_w_rec, fwd_bias;
  Eigen::MatrixXd bwd_w_in, bwd_w_rec, bwd_bias;

  explicit HeadGrads(const RecurrentHead& head) {
    const auto params = head.parameters();
    fwd_w_in = Eigen::MatrixXd::Zero(params[0].second->rows(), params[0].second->cols());
    fwd_w_rec = Eigen::MatrixXd::Zero(params[1].second->rows(), params[1].second->cols());
    fwd_bias = Eigen::MatrixXd::Zero(params[2].second->rows(), params[2].second->cols());
    bwd_w_in = Eigen::MatrixXd::Zero(params[3].second->rows(), params[3].second->cols());
    bwd_w_rec = Eigen::MatrixXd::Zero(params[4].second->rows(), params[4].second->cols());
    bwd_bias = Eigen::MatrixXd::Zero(params[5].second->rows(), params[5].second->cols());
  }

  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> blocks() const {
    return {
        {"head.forward.w_in", &fwd_w_in},   {"head.forward.w_rec", &fwd_w_rec},
        {"head.forward.bias", &fwd_bias},   {"head.backward.w_in", &bwd_w_in},
        {"head.backward.w_rec", &bwd_w_rec}, {"head.backward.bias", &bwd_bias},
    };
  }

  double squared_norm() const {
    double total = 0.0;
    for (const auto& [name, block] : blocks()) total += block->squaredNorm();
    return total;
  }
};

// Accumulates gradients for one sequence given d(loss)/d(embedding).
inline void head_backward(const RecurrentHead& head, const HeadCache& cache,
                          const Eigen::VectorXd& d_embedding, HeadGrads& grads) {
  const Eigen::Index h_dim = head.hidden_dim();
  head.forward_direction().backward(cache.forward_dir, d_embedding.head(h_dim),
                                    grads.fwd_w_in, grads.fwd_w_rec, grads.fwd_bias);
  head.backward_direction().backward(cache.backward_dir, d_embedding.tail(h_dim),
                                     grads.bwd_w_in, grads.bwd_w_rec, grads.bwd_bias);
}

}  // namespace stylo
