#pragma once

#include "sata/tensor.hpp"

namespace sata::ad {

template <class S>
struct AdamStateT {
  TensorT<S> m;
  TensorT<S> v;
  int64_t t = 0;

  static AdamStateT for_param(const TensorT<S>& p) {
    AdamStateT st;
    st.m = TensorT<S>::zeros(p.shape);
    st.v = TensorT<S>::zeros(p.shape);
    return st;
  }
};

using AdamState = AdamStateT<float>;

// Standard Adam update with bias correction; reads param.grad in place.
template <class S>
void adam_step(TensorT<S>& param, AdamStateT<S>& state, S lr, S beta1 = S(0.9),
               S beta2 = S(0.999), S eps = S(1e-8)) {
  if (state.m.shape != param.shape || state.v.shape != param.shape)
    throw Error("ShapeMismatch", "adam state shape != param shape");
  if (param.grad.size() != param.data.size())
    throw Error("ShapeMismatch", "param grad missing");
  state.t += 1;
  S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta1), static_cast<double>(state.t)));
  S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta2), static_cast<double>(state.t)));
  for (size_t i = 0; i < param.data.size(); ++i) {
    S g = param.grad[i];
    state.m.data[i] = beta1 * state.m.data[i] + (S(1) - beta1) * g;
    state.v.data[i] = beta2 * state.v.data[i] + (S(1) - beta2) * g * g;
    S mhat = state.m.data[i] / bc1;
    S vhat = state.v.data[i] / bc2;
    param.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

// Linear warmup then exponential decay with a floor.
inline double lr_schedule(int epoch, double base_lr, int warmup_epochs = 30,
                          double gamma = 0.99, double min_factor = 0.01) {
  if (epoch < 0) throw Error("InvalidConfig", "epoch must be >= 0");
  if (epoch < warmup_epochs)
    return base_lr * static_cast<double>(epoch + 1) / static_cast<double>(warmup_epochs);
  return base_lr * std::max(std::pow(gamma, static_cast<double>(epoch - warmup_epochs + 1)),
                            min_factor);
}

}  // namespace sata::ad
