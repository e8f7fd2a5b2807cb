#pragma once

#include <utility>

#include "lpcvae/autodiff/ops.hpp"

namespace lpcvae::ad {

/// Weights of one LSTM layer. Gate blocks are laid out [input, forget,
/// candidate, output] along the 4·hidden axis.
struct LstmParams {
  Tensor w_ih;  // [d_in × 4h]
  Tensor w_hh;  // [h × 4h]
  Tensor bias;  // [4h]

  std::size_t input_size() const { return w_ih.dim(0); }
  std::size_t hidden_size() const { return w_hh.dim(0); }
};

struct LstmState {
  Tensor h;
  Tensor c;
};

/// One recurrence step given the already projected input `x_proj` = x·W_ih + b.
inline LstmState lstm_step(const Tensor& x_proj, const Tensor& h_prev, const Tensor& c_prev,
                           const Tensor& w_hh) {
  const std::size_t hs = w_hh.dim(0);
  if (x_proj.numel() != 4 * hs || h_prev.numel() != hs || c_prev.numel() != hs)
    throw DimensionError("lstm: projected input " + shape_str(x_proj.shape()) + ", h " +
                         shape_str(h_prev.shape()) + ", c " + shape_str(c_prev.shape()) +
                         " inconsistent with hidden size " + std::to_string(hs));
  const Tensor gates = linear(h_prev, w_hh, x_proj);
  const Tensor i = sigmoid(slice_cols(gates, 0, hs));
  const Tensor f = sigmoid(slice_cols(gates, hs, 2 * hs));
  const Tensor g = tanh(slice_cols(gates, 2 * hs, 3 * hs));
  const Tensor o = sigmoid(slice_cols(gates, 3 * hs, 4 * hs));
  Tensor c = f * c_prev + i * g;
  Tensor h = o * tanh(c);
  return {std::move(h), std::move(c)};
}

/// Standard LSTM cell on vectors x [d_in], h_prev [h], c_prev [h].
inline LstmState lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                           const LstmParams& p) {
  if (x.rank() != 1 || x.numel() != p.input_size())
    throw DimensionError("lstm_cell: input " + shape_str(x.shape()) + " but w_ih is " +
                         shape_str(p.w_ih.shape()));
  return lstm_step(linear(x, p.w_ih, p.bias), h_prev, c_prev, p.w_hh);
}

}  // namespace lpcvae::ad
