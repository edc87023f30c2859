#pragma once

#include <functional>

#include "sata/tensor.hpp"

namespace sata::ad {

// Handle to a tape node.
struct Var {
  int id = -1;
};

// Reverse-mode tape over dense tensors. Records run in creation order;
// backward() visits each record exactly once in reverse. Leaf gradients
// accumulate into the registered tensor's grad slot (and across backward
// calls); interior gradients are per-call scratch.
template <class S>
class TapeT {
 public:
  Var constant(TensorT<S> v) { return push(std::move(v), {}, nullptr); }

  Var leaf(TensorT<S>& t) {
    if (!t.requires_grad) throw Error("ShapeMismatch", "leaf tensor lacks requires_grad");
    TensorT<S> copy;
    copy.shape = t.shape;
    copy.data = t.data;
    return push(std::move(copy), {}, &t);
  }

  const TensorT<S>& val(Var v) const { return nodes_[check(v)].value; }
  const std::vector<S>& grad(Var v) const { return nodes_[check(v)].grad; }
  size_t node_count() const { return nodes_.size(); }

  // ---- arithmetic ----

  Var add(Var a, Var b) { return binary(a, b, BinOp::Add); }
  Var sub(Var a, Var b) { return binary(a, b, BinOp::Sub); }
  Var hadamard(Var a, Var b) { return binary(a, b, BinOp::Mul); }
  Var divide(Var a, Var b) { return binary(a, b, BinOp::Div); }

  Var scalar_mul(Var a, S c) {
    const auto& av = val(a);
    TensorT<S> out = av;
    for (auto& x : out.data) x *= c;
    return push(std::move(out), [a, c](TapeT& t, int self) {
      auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
    });
  }

  Var scalar_add(Var a, S c) {
    TensorT<S> out = val(a);
    for (auto& x : out.data) x += c;
    return push(std::move(out), [a](TapeT& t, int self) {
      auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }

  Var matmul(Var a, Var b) {
    const auto& av = val(a);
    const auto& bv = val(b);
    require(av.rank() == 2 && bv.rank() == 2, "matmul expects rank-2 tensors");
    require(av.shape[1] == bv.shape[0], "matmul inner dimensions differ: " +
                                            shape_str(av.shape) + " x " + shape_str(bv.shape));
    TensorT<S> out = TensorT<S>::zeros({av.shape[0], bv.shape[1]});
    mm_nn(av, bv, out);
    return push(std::move(out), [a, b](TapeT& t, int self) {
      const auto& av2 = t.nodes_[a.id].value;
      const auto& bv2 = t.nodes_[b.id].value;
      const auto& g = t.nodes_[self].grad;
      // dA += G * B^T ; dB += A^T * G
      mm_nt_acc(g, t.nodes_[self].value.shape, bv2, t.nodes_[a.id].grad);
      mm_tn_acc(av2, g, t.nodes_[self].value.shape, t.nodes_[b.id].grad);
    });
  }

  Var transpose(Var a) {
    const auto& av = val(a);
    require(av.rank() == 2, "transpose expects rank-2");
    int r = av.shape[0], c = av.shape[1];
    TensorT<S> out = TensorT<S>::zeros({c, r});
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) out.data[static_cast<int64_t>(j) * r + i] = av.at(i, j);
    return push(std::move(out), [a, r, c](TapeT& t, int self) {
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) ga[static_cast<int64_t>(i) * c + j] += g[static_cast<int64_t>(j) * r + i];
    });
  }

  // ---- shape ops ----

  Var concat(const std::vector<Var>& parts, int axis) {
    require(!parts.empty(), "concat of zero tensors");
    const auto& first = val(parts[0]);
    require(first.rank() == 2, "concat expects rank-2");
    require(axis == 0 || axis == 1, "concat axis must be 0 or 1");
    int rows = first.shape[0], cols = first.shape[1];
    std::vector<int> offsets{0};
    for (Var p : parts) {
      const auto& pv = val(p);
      require(pv.rank() == 2, "concat expects rank-2");
      if (axis == 0)
        require(pv.shape[1] == cols, "concat column mismatch");
      else
        require(pv.shape[0] == rows, "concat row mismatch");
      offsets.push_back(offsets.back() + pv.shape[axis]);
    }
    Shape oshape = axis == 0 ? Shape{offsets.back(), cols} : Shape{rows, offsets.back()};
    TensorT<S> out = TensorT<S>::zeros(oshape);
    for (size_t k = 0; k < parts.size(); ++k) {
      const auto& pv = val(parts[k]);
      if (axis == 0) {
        std::copy(pv.data.begin(), pv.data.end(),
                  out.data.begin() + static_cast<int64_t>(offsets[k]) * cols);
      } else {
        for (int i = 0; i < rows; ++i)
          std::copy(pv.data.begin() + static_cast<int64_t>(i) * pv.shape[1],
                    pv.data.begin() + static_cast<int64_t>(i + 1) * pv.shape[1],
                    out.data.begin() + static_cast<int64_t>(i) * oshape[1] + offsets[k]);
      }
    }
    auto parts_copy = parts;
    return push(std::move(out), [parts_copy, offsets, axis](TapeT& t, int self) {
      const auto& g = t.nodes_[self].grad;
      const auto& oshape = t.nodes_[self].value.shape;
      for (size_t k = 0; k < parts_copy.size(); ++k) {
        auto& ga = t.nodes_[parts_copy[k].id].grad;
        const auto& pshape = t.nodes_[parts_copy[k].id].value.shape;
        if (axis == 0) {
          int64_t base = static_cast<int64_t>(offsets[k]) * oshape[1];
          for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[base + i];
        } else {
          for (int i = 0; i < pshape[0]; ++i)
            for (int j = 0; j < pshape[1]; ++j)
              ga[static_cast<int64_t>(i) * pshape[1] + j] +=
                  g[static_cast<int64_t>(i) * oshape[1] + offsets[k] + j];
        }
      }
    });
  }

  Var slice(Var a, int axis, int start, int len) {
    const auto& av = val(a);
    require(av.rank() == 2, "slice expects rank-2");
    require(axis == 0 || axis == 1, "slice axis must be 0 or 1");
    require(start >= 0 && len >= 1 && start + len <= av.shape[axis],
            "slice range out of bounds");
    int rows = av.shape[0], cols = av.shape[1];
    TensorT<S> out =
        TensorT<S>::zeros(axis == 0 ? Shape{len, cols} : Shape{rows, len});
    if (axis == 0) {
      std::copy(av.data.begin() + static_cast<int64_t>(start) * cols,
                av.data.begin() + static_cast<int64_t>(start + len) * cols, out.data.begin());
    } else {
      for (int i = 0; i < rows; ++i)
        std::copy(av.data.begin() + static_cast<int64_t>(i) * cols + start,
                  av.data.begin() + static_cast<int64_t>(i) * cols + start + len,
                  out.data.begin() + static_cast<int64_t>(i) * len);
    }
    return push(std::move(out), [a, axis, start, rows, cols](TapeT& t, int self) {
      const auto& g = t.nodes_[self].grad;
      const auto& oshape = t.nodes_[self].value.shape;
      auto& ga = t.nodes_[a.id].grad;
      if (axis == 0) {
        int64_t base = static_cast<int64_t>(start) * cols;
        for (size_t i = 0; i < g.size(); ++i) ga[base + i] += g[i];
      } else {
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < oshape[1]; ++j)
            ga[static_cast<int64_t>(i) * cols + start + j] +=
                g[static_cast<int64_t>(i) * oshape[1] + j];
      }
    });
  }

  Var gather_rows(Var a, std::vector<int> indices) {
    const auto& av = val(a);
    require(av.rank() == 2, "gather_rows expects rank-2");
    int cols = av.shape[1];
    for (int idx : indices)
      if (idx < 0 || idx >= av.shape[0])
        throw Error("IndexOutOfRange", "gather_rows index " + std::to_string(idx));
    TensorT<S> out = TensorT<S>::zeros({static_cast<int>(indices.size()), cols});
    for (size_t i = 0; i < indices.size(); ++i)
      std::copy(av.data.begin() + static_cast<int64_t>(indices[i]) * cols,
                av.data.begin() + static_cast<int64_t>(indices[i] + 1) * cols,
                out.data.begin() + static_cast<int64_t>(i) * cols);
    return push(std::move(out), [a, indices, cols](TapeT& t, int self) {
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      for (size_t i = 0; i < indices.size(); ++i)
        for (int j = 0; j < cols; ++j)
          ga[static_cast<int64_t>(indices[i]) * cols + j] +=
              g[static_cast<int64_t>(i) * cols + j];
    });
  }

  Var scatter_add_rows(Var a, std::vector<int> indices, int out_rows) {
    const auto& av = val(a);
    require(av.rank() == 2, "scatter_add_rows expects rank-2");
    require(static_cast<int>(indices.size()) == av.shape[0],
            "scatter_add_rows needs one index per input row");
    int cols = av.shape[1];
    for (int idx : indices)
      if (idx < 0 || idx >= out_rows)
        throw Error("IndexOutOfRange", "scatter_add_rows index " + std::to_string(idx));
    TensorT<S> out = TensorT<S>::zeros({out_rows, cols});
    for (size_t i = 0; i < indices.size(); ++i)
      for (int j = 0; j < cols; ++j)
        out.data[static_cast<int64_t>(indices[i]) * cols + j] +=
            av.data[static_cast<int64_t>(i) * cols + j];
    return push(std::move(out), [a, indices, cols](TapeT& t, int self) {
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      for (size_t i = 0; i < indices.size(); ++i)
        for (int j = 0; j < cols; ++j)
          ga[static_cast<int64_t>(i) * cols + j] +=
              g[static_cast<int64_t>(indices[i]) * cols + j];
    });
  }

  Var broadcast_rows(Var a, int n) {
    const auto& av = val(a);
    require(av.rank() == 2 && av.shape[0] == 1, "broadcast_rows expects a [1,d] tensor");
    int cols = av.shape[1];
    TensorT<S> out = TensorT<S>::zeros({n, cols});
    for (int i = 0; i < n; ++i)
      std::copy(av.data.begin(), av.data.end(), out.data.begin() + static_cast<int64_t>(i) * cols);
    return push(std::move(out), [a, n, cols](TapeT& t, int self) {
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < cols; ++j) ga[j] += g[static_cast<int64_t>(i) * cols + j];
    });
  }

  Var broadcast_cols(Var a, int d) {
    const auto& av = val(a);
    require(av.rank() == 2 && av.shape[1] == 1, "broadcast_cols expects a [n,1] tensor");
    int rows = av.shape[0];
    TensorT<S> out = TensorT<S>::zeros({rows, d});
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < d; ++j) out.at(i, j) = av.data[i];
    return push(std::move(out), [a, rows, d](TapeT& t, int self) {
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < d; ++j) ga[i] += g[static_cast<int64_t>(i) * d + j];
    });
  }

  // ---- reductions ----

  Var sum_all(Var a) {
    const auto& av = val(a);
    S acc = S(0);
    for (S x : av.data) acc += x;
    return push(TensorT<S>::scalar(acc), [a](TapeT& t, int self) {
      S g = t.nodes_[self].grad[0];
      auto& ga = t.nodes_[a.id].grad;
      for (auto& x : ga) x += g;
    });
  }

  Var mean_all(Var a) {
    const auto& av = val(a);
    return scalar_mul(sum_all(a), S(1) / static_cast<S>(av.size()));
  }

  Var sum(Var a, int axis) { return reduce(a, axis, false); }
  Var mean(Var a, int axis) { return reduce(a, axis, true); }

  // Max over an axis; argmax saved, ties resolved to the lowest index.
  Var max(Var a, int axis) {
    const auto& av = val(a);
    require(av.rank() == 2, "max expects rank-2");
    require(axis == 0 || axis == 1, "max axis must be 0 or 1");
    int rows = av.shape[0], cols = av.shape[1];
    int out_len = axis == 0 ? cols : rows;
    TensorT<S> out =
        TensorT<S>::zeros(axis == 0 ? Shape{1, cols} : Shape{rows, 1});
    std::vector<int> arg(out_len, 0);
    if (axis == 0) {
      for (int j = 0; j < cols; ++j) {
        S best = av.at(0, j);
        int bi = 0;
        for (int i = 1; i < rows; ++i)
          if (av.at(i, j) > best) {
            best = av.at(i, j);
            bi = i;
          }
        out.data[j] = best;
        arg[j] = bi;
      }
    } else {
      for (int i = 0; i < rows; ++i) {
        S best = av.at(i, 0);
        int bj = 0;
        for (int j = 1; j < cols; ++j)
          if (av.at(i, j) > best) {
            best = av.at(i, j);
            bj = j;
          }
        out.data[i] = best;
        arg[i] = bj;
      }
    }
    return push(std::move(out), [a, arg, axis, cols](TapeT& t, int self) {
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      if (axis == 0) {
        for (size_t j = 0; j < arg.size(); ++j)
          ga[static_cast<int64_t>(arg[j]) * cols + j] += g[j];
      } else {
        for (size_t i = 0; i < arg.size(); ++i)
          ga[static_cast<int64_t>(i) * cols + arg[i]] += g[i];
      }
    });
  }

  // ---- elementwise nonlinearities ----

  Var relu(Var a) {
    return unary(a, [](S x) { return x > S(0) ? x : S(0); },
                 [](S x, S) { return x > S(0) ? S(1) : S(0); });
  }
  Var sigmoid(Var a) {
    return unary(a, [](S x) { return S(1) / (S(1) + std::exp(-x)); },
                 [](S, S y) { return y * (S(1) - y); });
  }
  Var tanh_(Var a) {
    return unary(a, [](S x) { return std::tanh(x); },
                 [](S, S y) { return S(1) - y * y; });
  }
  Var exp_(Var a) {
    return unary(a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
  }
  Var log_(Var a) {
    return unary(a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
  }
  Var sqrt_(Var a) {
    return unary(a, [](S x) { return std::sqrt(x); },
                 [](S, S y) { return S(1) / (S(2) * y); });
  }

  Var softmax(Var a, int axis) {
    const auto& av = val(a);
    require(av.rank() == 2, "softmax expects rank-2");
    require(axis == 1, "softmax supports axis 1 (rows)");
    int rows = av.shape[0], cols = av.shape[1];
    TensorT<S> out = TensorT<S>::zeros(av.shape);
    for (int i = 0; i < rows; ++i) {
      S mx = av.at(i, 0);
      for (int j = 1; j < cols; ++j) mx = std::max(mx, av.at(i, j));
      S denom = S(0);
      for (int j = 0; j < cols; ++j) {
        S e = std::exp(av.at(i, j) - mx);
        out.at(i, j) = e;
        denom += e;
      }
      for (int j = 0; j < cols; ++j) out.at(i, j) /= denom;
    }
    return push(std::move(out), [a, rows, cols](TapeT& t, int self) {
      const auto& y = t.nodes_[self].value;
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      for (int i = 0; i < rows; ++i) {
        S dot = S(0);
        for (int j = 0; j < cols; ++j) dot += g[static_cast<int64_t>(i) * cols + j] * y.at(i, j);
        for (int j = 0; j < cols; ++j)
          ga[static_cast<int64_t>(i) * cols + j] +=
              (g[static_cast<int64_t>(i) * cols + j] - dot) * y.at(i, j);
      }
    });
  }

  // Row-wise layer normalization with learned gain/bias [1,d].
  Var layer_norm(Var x, Var gain, Var bias, S eps = S(1e-5)) {
    const auto& xv = val(x);
    const auto& gv = val(gain);
    const auto& bv = val(bias);
    require(xv.rank() == 2, "layer_norm expects rank-2 input");
    int rows = xv.shape[0], cols = xv.shape[1];
    require(gv.rank() == 2 && gv.shape[0] == 1 && gv.shape[1] == cols, "layer_norm gain shape");
    require(bv.rank() == 2 && bv.shape[0] == 1 && bv.shape[1] == cols, "layer_norm bias shape");
    TensorT<S> out = TensorT<S>::zeros(xv.shape);
    std::vector<S> inv_sigma(rows), mu(rows);
    for (int i = 0; i < rows; ++i) {
      S m = S(0);
      for (int j = 0; j < cols; ++j) m += xv.at(i, j);
      m /= static_cast<S>(cols);
      S var = S(0);
      for (int j = 0; j < cols; ++j) {
        S d = xv.at(i, j) - m;
        var += d * d;
      }
      var /= static_cast<S>(cols);
      S is = S(1) / std::sqrt(var + eps);
      mu[i] = m;
      inv_sigma[i] = is;
      for (int j = 0; j < cols; ++j)
        out.at(i, j) = (xv.at(i, j) - m) * is * gv.data[j] + bv.data[j];
    }
    return push(std::move(out),
                [x, gain, bias, mu, inv_sigma, rows, cols](TapeT& t, int self) {
      const auto& xv2 = t.nodes_[x.id].value;
      const auto& gv2 = t.nodes_[gain.id].value;
      const auto& g = t.nodes_[self].grad;
      auto& gx = t.nodes_[x.id].grad;
      auto& gg = t.nodes_[gain.id].grad;
      auto& gb = t.nodes_[bias.id].grad;
      for (int i = 0; i < rows; ++i) {
        S mean_dyhat = S(0), mean_dyhat_xhat = S(0);
        for (int j = 0; j < cols; ++j) {
          S xhat = (xv2.at(i, j) - mu[i]) * inv_sigma[i];
          S gij = g[static_cast<int64_t>(i) * cols + j];
          S dyhat = gij * gv2.data[j];
          mean_dyhat += dyhat;
          mean_dyhat_xhat += dyhat * xhat;
          gg[j] += gij * xhat;
          gb[j] += gij;
        }
        mean_dyhat /= static_cast<S>(cols);
        mean_dyhat_xhat /= static_cast<S>(cols);
        for (int j = 0; j < cols; ++j) {
          S xhat = (xv2.at(i, j) - mu[i]) * inv_sigma[i];
          S dyhat = g[static_cast<int64_t>(i) * cols + j] * gv2.data[j];
          gx[static_cast<int64_t>(i) * cols + j] +=
              inv_sigma[i] * (dyhat - mean_dyhat - xhat * mean_dyhat_xhat);
        }
      }
    });
  }

  // Inverted dropout; mask drawn from a counter-keyed generator so training
  // is reproducible. Identity when train is false or p == 0.
  Var dropout(Var a, double p, bool train, uint64_t rng_key) {
    if (!train || p <= 0.0) return a;
    require(p < 1.0, "dropout rate must be < 1");
    const auto& av = val(a);
    Rng rng(rng_key);
    std::vector<S> mask(av.size());
    S keep_inv = static_cast<S>(1.0 / (1.0 - p));
    for (auto& m : mask) m = (rng.uniform_double() < p) ? S(0) : keep_inv;
    TensorT<S> out = av;
    for (size_t i = 0; i < mask.size(); ++i) out.data[i] *= mask[i];
    return push(std::move(out), [a, mask](TapeT& t, int self) {
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      for (size_t i = 0; i < mask.size(); ++i) ga[i] += g[i] * mask[i];
    });
  }

  // ---- rotation helpers (row-wise 3x3 matrices stored as [n,9]) ----

  Var rotmat_compose(Var a, Var b) {
    const auto& av = val(a);
    const auto& bv = val(b);
    require(av.rank() == 2 && av.shape[1] == 9, "rotmat_compose expects [n,9]");
    require(bv.shape == av.shape, "rotmat_compose shape mismatch");
    int n = av.shape[0];
    TensorT<S> out = TensorT<S>::zeros(av.shape);
    for (int r = 0; r < n; ++r) {
      const S* A = &av.data[static_cast<int64_t>(r) * 9];
      const S* B = &bv.data[static_cast<int64_t>(r) * 9];
      S* C = &out.data[static_cast<int64_t>(r) * 9];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          C[i * 3 + j] = A[i * 3] * B[j] + A[i * 3 + 1] * B[3 + j] + A[i * 3 + 2] * B[6 + j];
    }
    return push(std::move(out), [a, b, n](TapeT& t, int self) {
      const auto& av2 = t.nodes_[a.id].value;
      const auto& bv2 = t.nodes_[b.id].value;
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      auto& gb = t.nodes_[b.id].grad;
      for (int r = 0; r < n; ++r) {
        const S* A = &av2.data[static_cast<int64_t>(r) * 9];
        const S* B = &bv2.data[static_cast<int64_t>(r) * 9];
        const S* G = &g[static_cast<int64_t>(r) * 9];
        S* dA = &ga[static_cast<int64_t>(r) * 9];
        S* dB = &gb[static_cast<int64_t>(r) * 9];
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            // dA = G * B^T ; dB = A^T * G
            dA[i * 3 + j] += G[i * 3] * B[j * 3] + G[i * 3 + 1] * B[j * 3 + 1] +
                             G[i * 3 + 2] * B[j * 3 + 2];
            dB[i * 3 + j] += A[i] * G[j] + A[3 + i] * G[3 + j] + A[6 + i] * G[6 + j];
          }
      }
    });
  }

  Var rotmat_apply(Var rot, Var vec) {
    const auto& rv = val(rot);
    const auto& vv = val(vec);
    require(rv.rank() == 2 && rv.shape[1] == 9, "rotmat_apply expects [n,9] rotations");
    require(vv.rank() == 2 && vv.shape[1] == 3 && vv.shape[0] == rv.shape[0],
            "rotmat_apply expects matching [n,3] vectors");
    int n = rv.shape[0];
    TensorT<S> out = TensorT<S>::zeros({n, 3});
    for (int r = 0; r < n; ++r) {
      const S* R = &rv.data[static_cast<int64_t>(r) * 9];
      const S* v = &vv.data[static_cast<int64_t>(r) * 3];
      S* o = &out.data[static_cast<int64_t>(r) * 3];
      for (int i = 0; i < 3; ++i) o[i] = R[i * 3] * v[0] + R[i * 3 + 1] * v[1] + R[i * 3 + 2] * v[2];
    }
    return push(std::move(out), [rot, vec, n](TapeT& t, int self) {
      const auto& rv2 = t.nodes_[rot.id].value;
      const auto& vv2 = t.nodes_[vec.id].value;
      const auto& g = t.nodes_[self].grad;
      auto& gr = t.nodes_[rot.id].grad;
      auto& gv = t.nodes_[vec.id].grad;
      for (int r = 0; r < n; ++r) {
        const S* R = &rv2.data[static_cast<int64_t>(r) * 9];
        const S* v = &vv2.data[static_cast<int64_t>(r) * 3];
        const S* G = &g[static_cast<int64_t>(r) * 3];
        S* dR = &gr[static_cast<int64_t>(r) * 9];
        S* dv = &gv[static_cast<int64_t>(r) * 3];
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            dR[i * 3 + j] += G[i] * v[j];
            dv[j] += R[i * 3 + j] * G[i];
          }
      }
    });
  }

  // Numerically stable binary cross-entropy from logits against constant
  // targets; elementwise output.
  Var bce_with_logits(Var logits, const TensorT<S>& targets) {
    const auto& xv = val(logits);
    require(xv.shape == targets.shape, "bce_with_logits target shape mismatch");
    TensorT<S> out = TensorT<S>::zeros(xv.shape);
    for (int64_t i = 0; i < xv.size(); ++i) {
      S x = xv.data[i], y = targets.data[i];
      out.data[i] = std::max(x, S(0)) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
    auto tgt = targets.data;
    return push(std::move(out), [logits, tgt](TapeT& t, int self) {
      const auto& xv2 = t.nodes_[logits.id].value;
      const auto& g = t.nodes_[self].grad;
      auto& gx = t.nodes_[logits.id].grad;
      for (size_t i = 0; i < g.size(); ++i) {
        S sig = S(1) / (S(1) + std::exp(-xv2.data[i]));
        gx[i] += g[i] * (sig - tgt[i]);
      }
    });
  }

  // ---- backward ----

  void backward(Var loss) {
    if (!val(loss).is_scalar()) throw Error("NonScalarLoss", "backward needs a scalar loss");
    for (auto& n : nodes_) n.grad.assign(n.value.data.size(), S(0));
    nodes_[loss.id].grad[0] = S(1);
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i)
      if (nodes_[i].backward_fn) nodes_[i].backward_fn(*this, i);
    for (auto& n : nodes_)
      if (n.leaf != nullptr) {
        if (n.leaf->grad.size() != n.grad.size()) n.leaf->grad.assign(n.grad.size(), S(0));
        for (size_t i = 0; i < n.grad.size(); ++i) n.leaf->grad[i] += n.grad[i];
      }
  }

 private:
  enum class BinOp { Add, Sub, Mul, Div };

  struct Node {
    TensorT<S> value;
    std::vector<S> grad;
    std::function<void(TapeT&, int)> backward_fn;
    TensorT<S>* leaf = nullptr;
  };

  std::vector<Node> nodes_;

  int check(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw Error("IndexOutOfRange", "invalid tape handle");
    return v.id;
  }

  static void require(bool ok, const std::string& msg) {
    if (!ok) throw Error("ShapeMismatch", msg);
  }

  Var push(TensorT<S> value, std::function<void(TapeT&, int)> fn,
           TensorT<S>* leaf = nullptr) {
    Node n;
    n.value = std::move(value);
    n.backward_fn = std::move(fn);
    n.leaf = leaf;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  template <class F, class DF>
  Var unary(Var a, F f, DF df) {
    const auto& av = val(a);
    TensorT<S> out = av;
    for (auto& x : out.data) x = f(x);
    return push(std::move(out), [a, df](TapeT& t, int self) {
      const auto& xin = t.nodes_[a.id].value;
      const auto& y = t.nodes_[self].value;
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(xin.data[i], y.data[i]);
    });
  }

  // Broadcast cases: same shape; b a [1,d] row; b a scalar.
  Var binary(Var a, Var b, BinOp op) {
    const auto& av = val(a);
    const auto& bv = val(b);
    enum class Mode { Same, Row, Scalar } mode;
    if (av.shape == bv.shape) {
      mode = Mode::Same;
    } else if (bv.is_scalar()) {
      mode = Mode::Scalar;
    } else if (av.rank() == 2 && bv.rank() == 2 && bv.shape[0] == 1 &&
               bv.shape[1] == av.shape[1]) {
      mode = Mode::Row;
    } else {
      throw Error("ShapeMismatch", "binary op shapes " + shape_str(av.shape) + " vs " +
                                       shape_str(bv.shape));
    }
    int cols = av.rank() >= 1 ? av.shape[av.rank() - 1] : 1;
    auto bval = [&](int64_t i) -> S {
      switch (mode) {
        case Mode::Same: return bv.data[i];
        case Mode::Row: return bv.data[i % cols];
        default: return bv.data[0];
      }
    };
    TensorT<S> out = av;
    for (int64_t i = 0; i < out.size(); ++i) {
      S x = av.data[i], y = bval(i);
      switch (op) {
        case BinOp::Add: out.data[i] = x + y; break;
        case BinOp::Sub: out.data[i] = x - y; break;
        case BinOp::Mul: out.data[i] = x * y; break;
        case BinOp::Div: out.data[i] = x / y; break;
      }
    }
    return push(std::move(out), [a, b, op, mode, cols](TapeT& t, int self) {
      const auto& av2 = t.nodes_[a.id].value;
      const auto& bv2 = t.nodes_[b.id].value;
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      auto& gb = t.nodes_[b.id].grad;
      auto bidx = [&](int64_t i) -> int64_t {
        switch (mode) {
          case Mode::Same: return i;
          case Mode::Row: return i % cols;
          default: return 0;
        }
      };
      for (int64_t i = 0; i < static_cast<int64_t>(g.size()); ++i) {
        S gi = g[i];
        int64_t bi = bidx(i);
        switch (op) {
          case BinOp::Add:
            ga[i] += gi;
            gb[bi] += gi;
            break;
          case BinOp::Sub:
            ga[i] += gi;
            gb[bi] -= gi;
            break;
          case BinOp::Mul:
            ga[i] += gi * bv2.data[bi];
            gb[bi] += gi * av2.data[i];
            break;
          case BinOp::Div: {
            S inv = S(1) / bv2.data[bi];
            ga[i] += gi * inv;
            gb[bi] -= gi * av2.data[i] * inv * inv;
            break;
          }
        }
      }
    });
  }

  Var reduce(Var a, int axis, bool mean_mode) {
    const auto& av = val(a);
    require(av.rank() == 2, "sum/mean expects rank-2");
    require(axis == 0 || axis == 1, "axis must be 0 or 1");
    int rows = av.shape[0], cols = av.shape[1];
    S denom = mean_mode ? static_cast<S>(axis == 0 ? rows : cols) : S(1);
    TensorT<S> out = TensorT<S>::zeros(axis == 0 ? Shape{1, cols} : Shape{rows, 1});
    if (axis == 0) {
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out.data[j] += av.at(i, j);
    } else {
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out.data[i] += av.at(i, j);
    }
    if (mean_mode)
      for (auto& x : out.data) x /= denom;
    return push(std::move(out), [a, axis, rows, cols, denom](TapeT& t, int self) {
      const auto& g = t.nodes_[self].grad;
      auto& ga = t.nodes_[a.id].grad;
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
          ga[static_cast<int64_t>(i) * cols + j] += g[axis == 0 ? j : i] / denom;
    });
  }

  // C = A * B
  static void mm_nn(const TensorT<S>& a, const TensorT<S>& b, TensorT<S>& c) {
    int n = a.shape[0], k = a.shape[1], m = b.shape[1];
    const S* A = a.data.data();
    const S* B = b.data.data();
    S* C = c.data.data();
    for (int i = 0; i < n; ++i) {
      S* Ci = C + static_cast<int64_t>(i) * m;
      for (int p = 0; p < k; ++p) {
        S av = A[static_cast<int64_t>(i) * k + p];
        const S* Bp = B + static_cast<int64_t>(p) * m;
        for (int j = 0; j < m; ++j) Ci[j] += av * Bp[j];
      }
    }
  }

  // acc += G * B^T where G has shape gshape ([n,m]), B is [k,m]; acc is [n,k].
  static void mm_nt_acc(const std::vector<S>& g, const Shape& gshape, const TensorT<S>& b,
                        std::vector<S>& acc) {
    int n = gshape[0], m = gshape[1], k = b.shape[0];
    const S* G = g.data();
    const S* B = b.data.data();
    for (int i = 0; i < n; ++i) {
      const S* Gi = G + static_cast<int64_t>(i) * m;
      for (int p = 0; p < k; ++p) {
        const S* Bp = B + static_cast<int64_t>(p) * m;
        S dot = S(0);
        for (int j = 0; j < m; ++j) dot += Gi[j] * Bp[j];
        acc[static_cast<int64_t>(i) * k + p] += dot;
      }
    }
  }

  // acc += A^T * G where A is [n,k], G has shape gshape ([n,m]); acc is [k,m].
  static void mm_tn_acc(const TensorT<S>& a, const std::vector<S>& g, const Shape& gshape,
                        std::vector<S>& acc) {
    int n = gshape[0], m = gshape[1], k = a.shape[1];
    const S* A = a.data.data();
    const S* G = g.data();
    for (int i = 0; i < n; ++i) {
      const S* Gi = G + static_cast<int64_t>(i) * m;
      for (int p = 0; p < k; ++p) {
        S av = A[static_cast<int64_t>(i) * k + p];
        S* accp = acc.data() + static_cast<int64_t>(p) * m;
        for (int j = 0; j < m; ++j) accp[j] += av * Gi[j];
      }
    }
  }
};

using Tape = TapeT<float>;

}  // namespace sata::ad
