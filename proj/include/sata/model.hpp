#pragma once

#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sata/graphrepr.hpp"
#include "sata/tape.hpp"

namespace sata::model {

using ad::Shape;
using ad::TensorT;
using ad::Var;

struct BottleneckConfig {
  enum class Kind { VAE, RVQ };
  Kind kind = Kind::VAE;
  int latent = 128;     // 256 for RVQ
  int quantizers = 6;   // RVQ only
  int codebook = 1024;  // RVQ only
};

struct ModelConfig {
  int hidden = 256;
  int heads = 4;
  double dropout = 0.1;
  int ff_inner = 512;
  int blocks_per_side = 3;
  int d_text = 64;
  int sincos_bands = 8;
  BottleneckConfig bottleneck;
  int window = 64;
  int overlap = 16;
  bool temporal_blocks = true;          // off reproduces the spatial-only variant
  bool decoder_seam_per_block = false;  // re-inject target modulation per block

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// ---- parameter registry ----

template <class S>
struct ParamSetT {
  std::vector<std::pair<std::string, TensorT<S>*>> entries;

  void reg(const std::string& name, TensorT<S>& t) {
    t.enable_grad();
    entries.emplace_back(name, &t);
  }
  TensorT<S>* find(const std::string& name) const {
    for (const auto& [n, p] : entries)
      if (n == name) return p;
    return nullptr;
  }
  void zero_grads() {
    for (auto& [n, p] : entries) p->zero_grad();
  }
};

// Per-forward context: the tape, train/eval mode, and the counter-based key
// stream for dropout masks and bottleneck noise.
template <class S>
struct CtxT {
  ad::TapeT<S>& tape;
  bool train = false;
  uint64_t seed = 0;
  uint64_t call_counter = 0;
  std::unordered_map<const void*, Var> param_vars;

  explicit CtxT(ad::TapeT<S>& t) : tape(t) {}

  Var pvar(TensorT<S>& t) {
    auto it = param_vars.find(&t);
    if (it != param_vars.end()) return it->second;
    Var v = tape.leaf(t);
    param_vars.emplace(&t, v);
    return v;
  }
  uint64_t next_key() { return hash_combine(seed, ++call_counter); }
};

template <class S>
struct LinearT {
  TensorT<S> w;  // [in, out]
  TensorT<S> b;  // [1, out]
  bool has_bias = true;

  void init(ParamSetT<S>& ps, const std::string& name, int in, int out, Rng& rng,
            bool bias = true) {
    w = ad::xavier_init<S>(in, out, rng);
    has_bias = bias;
    ps.reg(name + ".w", w);
    if (bias) {
      b = TensorT<S>::zeros({1, out});
      ps.reg(name + ".b", b);
    }
  }
  Var apply(CtxT<S>& cx, Var x) {
    Var y = cx.tape.matmul(x, cx.pvar(w));
    if (has_bias) y = cx.tape.add(y, cx.pvar(b));
    return y;
  }
};

template <class S>
struct Mlp2T {
  LinearT<S> l0, l1;

  void init(ParamSetT<S>& ps, const std::string& name, int in, int mid, int out, Rng& rng) {
    l0.init(ps, name + ".0", in, mid, rng);
    l1.init(ps, name + ".1", mid, out, rng);
  }
  Var apply(CtxT<S>& cx, Var x) {
    return l1.apply(cx, cx.tape.relu(l0.apply(cx, x)));
  }
};

template <class S>
struct AttentionT {
  LinearT<S> wq, wk, wv, wo;
  int heads = 1;
  double dropout = 0.0;

  void init(ParamSetT<S>& ps, const std::string& name, int dim, int n_heads, double p,
            Rng& rng) {
    heads = n_heads;
    dropout = p;
    wq.init(ps, name + ".wq", dim, dim, rng);
    wk.init(ps, name + ".wk", dim, dim, rng);
    wv.init(ps, name + ".wv", dim, dim, rng);
    wo.init(ps, name + ".wo", dim, dim, rng);
  }

  // Multi-head self-attention over the rows of x; mask (when present) is an
  // additive [n,n] score bias.
  Var apply(CtxT<S>& cx, Var x, const TensorT<S>* mask = nullptr) {
    auto& t = cx.tape;
    const int dim = t.val(x).shape[1];
    const int dh = dim / heads;
    Var q = wq.apply(cx, x);
    Var k = wk.apply(cx, x);
    Var v = wv.apply(cx, x);
    const S scale = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dh)));
    std::vector<Var> outs;
    Var mask_var{-1};
    if (mask != nullptr) mask_var = t.constant(*mask);
    for (int h = 0; h < heads; ++h) {
      Var qh = t.slice(q, 1, h * dh, dh);
      Var kh = t.slice(k, 1, h * dh, dh);
      Var vh = t.slice(v, 1, h * dh, dh);
      Var scores = t.scalar_mul(t.matmul(qh, t.transpose(kh)), scale);
      if (mask != nullptr) scores = t.add(scores, mask_var);
      Var attn = t.softmax(scores, 1);
      attn = t.dropout(attn, dropout, cx.train, cx.next_key());
      outs.push_back(t.matmul(attn, vh));
    }
    Var cat = heads == 1 ? outs[0] : t.concat(outs, 1);
    return wo.apply(cx, cat);
  }
};

// ---- Semantic-Aware Feature Modulation ----

template <class S>
struct SeamParamsT {
  LinearT<S> phi_m;  // motion projection: d_in -> hidden
  LinearT<S> phi_s;  // sinusoidal spatial features -> hidden
  LinearT<S> phi_t;  // semantic embedding -> hidden
  Mlp2T<S> cond;     // [z_s; z_t] -> hidden (condition MLP)
  LinearT<S> mod;    // hidden -> 2*hidden, predicts [gamma, beta]
  LinearT<S> gate;   // hidden -> hidden, no bias
  TensorT<S> ln_gain, ln_bias;  // fixed unit/zero (modulation supplies affine)

  void init(ParamSetT<S>& ps, const std::string& name, int d_in, int hidden, int d_text,
            int sincos_bands, Rng& rng) {
    phi_m.init(ps, name + ".phi_m", d_in, hidden, rng);
    phi_s.init(ps, name + ".phi_s", 6 * 2 * sincos_bands, hidden, rng);
    phi_t.init(ps, name + ".phi_t", d_text, hidden, rng);
    cond.init(ps, name + ".cond", 2 * hidden, hidden, hidden, rng);
    mod.init(ps, name + ".mod", hidden, 2 * hidden, rng);
    gate.init(ps, name + ".gate", hidden, hidden, rng, /*bias=*/false);
    ln_gain = TensorT<S>::full({1, hidden}, S(1));
    ln_bias = TensorT<S>::zeros({1, hidden});
  }
};

// Interleaved sin/cos features of each coordinate of [X_g; X_l] over
// geometrically spaced frequencies (base 2).
template <class S>
TensorT<S> sinusoidal_features(const TensorT<S>& x_g, const TensorT<S>& x_l, int bands) {
  const int n = x_g.shape[0];
  TensorT<S> out = TensorT<S>::zeros({n, 6 * 2 * bands});
  for (int i = 0; i < n; ++i) {
    int c = 0;
    for (int coord = 0; coord < 6; ++coord) {
      S v = coord < 3 ? x_g.at(i, coord) : x_l.at(i, coord - 3);
      S freq = S(1);
      for (int k = 0; k < bands; ++k) {
        out.at(i, c++) = std::sin(freq * v);
        out.at(i, c++) = std::cos(freq * v);
        freq *= S(2);
      }
    }
  }
  return out;
}

// Node condition derived from statics; fixed across the frames of a window.
template <class S>
struct SeamCondT {
  Var gamma, beta, gate;  // each [N, hidden]
};

template <class S>
SeamCondT<S> seam_condition(CtxT<S>& cx, SeamParamsT<S>& p, const TensorT<S>& x_g,
                            const TensorT<S>& x_l, const TensorT<S>& x_t, int bands) {
  auto& t = cx.tape;
  if (x_g.shape[0] != x_l.shape[0] || x_g.shape[0] != x_t.shape[0])
    throw Error("ShapeMismatch", "static feature row counts differ");
  Var zs = p.phi_s.apply(cx, t.constant(sinusoidal_features(x_g, x_l, bands)));
  Var zt = p.phi_t.apply(cx, t.constant(x_t));
  Var c = p.cond.apply(cx, t.concat({zs, zt}, 1));
  Var gb = p.mod.apply(cx, c);
  const int hidden = t.val(c).shape[1];
  SeamCondT<S> out;
  out.gamma = t.slice(gb, 1, 0, hidden);
  out.beta = t.slice(gb, 1, hidden, hidden);
  out.gate = t.sigmoid(p.gate.apply(cx, c));
  return out;
}

// Gated FiLM-style modulation of projected motion features:
//   x_hat = LN(z_m) * (1 + gamma) + beta;  out = z_m + g * x_hat
// cond rows are indexed per output row via cond_index (tiling across frames).
template <class S>
Var seam_apply(CtxT<S>& cx, SeamParamsT<S>& p, Var f_m, const SeamCondT<S>& cond,
               const std::vector<int>& cond_index) {
  auto& t = cx.tape;
  Var zm = p.phi_m.apply(cx, f_m);
  Var gamma = t.gather_rows(cond.gamma, cond_index);
  Var beta = t.gather_rows(cond.beta, cond_index);
  Var gate = t.gather_rows(cond.gate, cond_index);
  Var ln = t.layer_norm(zm, t.constant(p.ln_gain), t.constant(p.ln_bias));
  Var xhat = t.add(t.hadamard(ln, t.scalar_add(gamma, S(1))), beta);
  return t.add(zm, t.hadamard(gate, xhat));
}

// One-call form for a single frame (rows align with condition rows).
template <class S>
Var seam_modulate(CtxT<S>& cx, SeamParamsT<S>& p, Var f_m, const TensorT<S>& x_g,
                  const TensorT<S>& x_l, const TensorT<S>& x_t, int bands) {
  const int n = cx.tape.val(f_m).shape[0];
  if (x_g.shape[0] != n) throw Error("ShapeMismatch", "F_m rows != static rows");
  SeamCondT<S> cond = seam_condition(cx, p, x_g, x_l, x_t, bands);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  return seam_apply(cx, p, f_m, cond, idx);
}

// ---- batched graph structure ----

template <class S>
struct WindowInputT {
  int T = 0;
  int N = 0;                       // total nodes over all graphs
  std::vector<int> graph_offsets;  // node offset per graph
  std::vector<int> graph_sizes;
  std::vector<int> edge_src, edge_dst;  // directed (both orientations)
  std::vector<int> edge_gather;         // directed edge -> undirected feature row
  TensorT<S> edge_feats;                // [E, 2] (depth, reverse depth)
  TensorT<S> x_g, x_l, x_t;             // [N,3] [N,3] [N,d_text]
  TensorT<S> attn_mask;                 // [N,N]; 0 within a graph, -1e9 across
  TensorT<S> fm;                        // [T*N, d_dyn] frame-major (encode side)

  int graphs() const { return static_cast<int>(graph_sizes.size()); }
};

// Static structure of one graph, ready for batching.
template <class S>
struct GraphStaticsT {
  int J = 0;
  std::vector<repr::EdgeInfo> edges;
  TensorT<S> x_g, x_l, x_t;
};

template <class S>
GraphStaticsT<S> graph_statics_from(const repr::MotionGraphSequence& seq) {
  GraphStaticsT<S> g;
  g.J = seq.joint_count;
  g.edges = seq.edges;
  g.x_g = TensorT<S>::zeros({g.J, 3});
  g.x_l = TensorT<S>::zeros({g.J, 3});
  if (seq.statics.x_text.empty())
    throw Error("EmbeddingCountMismatch", "sequence has no semantic embeddings");
  const int d_text = static_cast<int>(seq.statics.x_text[0].size());
  g.x_t = TensorT<S>::zeros({g.J, d_text});
  for (int i = 0; i < g.J; ++i) {
    for (int d = 0; d < 3; ++d) {
      g.x_g.at(i, d) = static_cast<S>(seq.statics.x_global[i][d]);
      g.x_l.at(i, d) = static_cast<S>(seq.statics.x_local[i][d]);
    }
    for (int d = 0; d < d_text; ++d) g.x_t.at(i, d) = static_cast<S>(seq.statics.x_text[i][d]);
  }
  return g;
}

// Disjoint union of graphs; attention is masked within each graph and no edge
// may cross graph boundaries.
template <class S>
WindowInputT<S> batch_graphs(const std::vector<GraphStaticsT<S>>& graphs, int T) {
  WindowInputT<S> w;
  w.T = T;
  int d_text = -1;
  for (const auto& g : graphs) {
    if (d_text < 0) d_text = g.x_t.shape[1];
    if (g.x_t.shape[1] != d_text)
      throw Error("ShapeMismatch", "inconsistent d_text across batch");
    w.graph_offsets.push_back(w.N);
    w.graph_sizes.push_back(g.J);
    w.N += g.J;
  }
  w.x_g = TensorT<S>::zeros({w.N, 3});
  w.x_l = TensorT<S>::zeros({w.N, 3});
  w.x_t = TensorT<S>::zeros({w.N, d_text});
  int e_total = 0;
  for (const auto& g : graphs) e_total += static_cast<int>(g.edges.size());
  w.edge_feats = TensorT<S>::zeros({std::max(e_total, 1), 2});
  int erow = 0;
  for (size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = graphs[gi];
    int off = w.graph_offsets[gi];
    for (int i = 0; i < g.J; ++i) {
      for (int d = 0; d < 3; ++d) {
        w.x_g.at(off + i, d) = g.x_g.at(i, d);
        w.x_l.at(off + i, d) = g.x_l.at(i, d);
      }
      for (int d = 0; d < d_text; ++d) w.x_t.at(off + i, d) = g.x_t.at(i, d);
    }
    for (const auto& e : g.edges) {
      if (e.parent < 0 || e.parent >= g.J || e.child < 0 || e.child >= g.J)
        throw Error("CrossGraphEdge", "edge references a node outside its graph");
      w.edge_feats.at(erow, 0) = static_cast<S>(e.depth);
      w.edge_feats.at(erow, 1) = static_cast<S>(e.reverse_depth);
      // both message directions share the undirected edge features
      w.edge_src.push_back(off + e.parent);
      w.edge_dst.push_back(off + e.child);
      w.edge_gather.push_back(erow);
      w.edge_src.push_back(off + e.child);
      w.edge_dst.push_back(off + e.parent);
      w.edge_gather.push_back(erow);
      ++erow;
    }
  }
  w.attn_mask = TensorT<S>::zeros({w.N, w.N});
  for (size_t gi = 0; gi < graphs.size(); ++gi)
    for (int i = 0; i < w.graph_sizes[gi]; ++i)
      for (int j = 0; j < w.N; ++j) {
        int gi_row = w.graph_offsets[gi] + i;
        bool same = j >= w.graph_offsets[gi] && j < w.graph_offsets[gi] + w.graph_sizes[gi];
        if (!same) w.attn_mask.at(gi_row, j) = S(-1e9);
      }
  return w;
}

// ---- spatio-temporal blocks ----

template <class S>
struct SpatialBlockT {
  Mlp2T<S> edge_mlp;  // (depth, reverse depth) -> hidden
  Mlp2T<S> gine_mlp;
  AttentionT<S> attn;
  Mlp2T<S> fuse;

  void init(ParamSetT<S>& ps, const std::string& name, const ModelConfig& cfg, Rng& rng) {
    edge_mlp.init(ps, name + ".edge", 2, cfg.hidden, cfg.hidden, rng);
    gine_mlp.init(ps, name + ".gine", cfg.hidden, cfg.hidden, cfg.hidden, rng);
    attn.init(ps, name + ".attn", cfg.hidden, cfg.heads, cfg.dropout, rng);
    fuse.init(ps, name + ".fuse", cfg.hidden, cfg.ff_inner, cfg.hidden, rng);
  }
};

// Dual-path spatial mixing over one frame's node rows:
//   A: GINE-style message passing with edge-depth embeddings, eps = 0
//   B: masked multi-head self-attention
//   out = H + fuse(A + B)
template <class S>
Var spatial_block(CtxT<S>& cx, SpatialBlockT<S>& p, Var h, const WindowInputT<S>& w,
                  Var edge_emb) {
  auto& t = cx.tape;
  Var agg;
  if (w.edge_src.empty()) {
    agg = t.constant(TensorT<S>::zeros(t.val(h).shape));
  } else {
    Var msg = t.relu(t.add(t.gather_rows(h, w.edge_src), t.gather_rows(edge_emb, w.edge_gather)));
    agg = t.scatter_add_rows(msg, w.edge_dst, w.N);
  }
  Var a = p.gine_mlp.apply(cx, t.add(h, agg));
  Var b = p.attn.apply(cx, h, &w.attn_mask);
  Var fused = p.fuse.apply(cx, t.add(a, b));
  fused = t.dropout(fused, p.attn.dropout, cx.train, cx.next_key());
  return t.add(h, fused);
}

template <class S>
struct TemporalBlockT {
  AttentionT<S> attn;
  Mlp2T<S> ff;

  void init(ParamSetT<S>& ps, const std::string& name, const ModelConfig& cfg, Rng& rng) {
    attn.init(ps, name + ".attn", cfg.hidden, cfg.heads, cfg.dropout, rng);
    ff.init(ps, name + ".ff", cfg.hidden, cfg.ff_inner, cfg.hidden, rng);
  }
};

// Reshape indices between frame-major [t*N+j] and node-major [j*T+t] layouts
// (the T / T^-1 operators).
std::vector<int> to_node_major_indices(int T, int N);
std::vector<int> to_frame_major_indices(int T, int N);

// Standard interleaved sinusoidal position table [T, dim].
template <class S>
TensorT<S> sinusoidal_position_table(int T, int dim) {
  TensorT<S> out = TensorT<S>::zeros({T, dim});
  for (int pos = 0; pos < T; ++pos)
    for (int i = 0; i < dim; i += 2) {
      double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
      out.at(pos, i) = static_cast<S>(std::sin(pos * freq));
      if (i + 1 < dim) out.at(pos, i + 1) = static_cast<S>(std::cos(pos * freq));
    }
  return out;
}

// Per-joint temporal self-attention with additive sinusoidal position
// encoding, followed by a feed-forward sublayer; both residual.
template <class S>
Var temporal_block(CtxT<S>& cx, TemporalBlockT<S>& p, Var x_frame_major, int T, int N) {
  auto& t = cx.tape;
  const int hidden = t.val(x_frame_major).shape[1];
  Var nm = t.gather_rows(x_frame_major, to_node_major_indices(T, N));
  Var pe = t.constant(sinusoidal_position_table<S>(T, hidden));
  std::vector<Var> streams;
  streams.reserve(N);
  for (int j = 0; j < N; ++j) {
    Var s = t.slice(nm, 0, j * T, T);
    Var s1 = t.add(s, p.attn.apply(cx, t.add(s, pe)));
    Var ff = p.ff.apply(cx, s1);
    ff = t.dropout(ff, p.attn.dropout, cx.train, cx.next_key());
    streams.push_back(t.add(s1, ff));
  }
  Var out_nm = N == 1 ? streams[0] : t.concat(streams, 0);
  return t.gather_rows(out_nm, to_frame_major_indices(T, N));
}

// ---- bottlenecks ----

template <class S>
struct VaeOutT {
  Var mu, logvar, sample;
};

template <class S>
struct RvqOutT {
  std::vector<std::vector<int>> indices;  // [T][quantizers]
  Var quantized;                          // straight-through estimator
  Var commit_loss;
  Var codebook_loss;
};

// ---- the full model ----

template <class S>
class SataModelT {
 public:
  ModelConfig cfg;
  ParamSetT<S> params;

  explicit SataModelT(ModelConfig c) : cfg(std::move(c)) { cfg.validate(); }
  SataModelT(const SataModelT&) = delete;
  SataModelT& operator=(const SataModelT&) = delete;

  void init(uint64_t seed) {
    Rng rng(seed);
    const int latent = cfg.bottleneck.latent;
    enc_seam_.init(params, "enc.seam", repr::kDynWidth, cfg.hidden, cfg.d_text,
                   cfg.sincos_bands, rng);
    enc_spatial_.resize(cfg.blocks_per_side);
    enc_temporal_.resize(cfg.blocks_per_side);
    dec_spatial_.resize(cfg.blocks_per_side);
    dec_temporal_.resize(cfg.blocks_per_side);
    for (int i = 0; i < cfg.blocks_per_side; ++i) {
      enc_spatial_[i].init(params, "enc.block" + std::to_string(i) + ".spatial", cfg, rng);
      enc_temporal_[i].init(params, "enc.block" + std::to_string(i) + ".temporal", cfg, rng);
    }
    pool_proj_.init(params, "enc.pool", cfg.hidden, latent, rng);
    if (cfg.bottleneck.kind == BottleneckConfig::Kind::VAE) {
      vae_head_.init(params, "vae.head", latent, 2 * latent, rng);
    } else {
      codebooks_.resize(cfg.bottleneck.quantizers);
      for (int k = 0; k < cfg.bottleneck.quantizers; ++k) {
        codebooks_[k] = ad::randn<S>({cfg.bottleneck.codebook, latent}, rng, 0.1);
        params.reg("rvq.codebook" + std::to_string(k), codebooks_[k]);
      }
    }
    dec_seam_.init(params, "dec.seam", latent, cfg.hidden, cfg.d_text, cfg.sincos_bands,
                   rng);
    for (int i = 0; i < cfg.blocks_per_side; ++i) {
      dec_spatial_[i].init(params, "dec.block" + std::to_string(i) + ".spatial", cfg, rng);
      dec_temporal_[i].init(params, "dec.block" + std::to_string(i) + ".temporal", cfg, rng);
    }
    head_.init(params, "dec.head", cfg.hidden, cfg.hidden, repr::kOutWidth, rng);
  }

  // Per-frame pre-latents, one [T, latent] Var per graph in the batch.
  std::vector<Var> encode(CtxT<S>& cx, const WindowInputT<S>& w) {
    auto& t = cx.tape;
    if (w.fm.shape != Shape{w.T * w.N, repr::kDynWidth})
      throw Error("ShapeMismatch", "window F_m must be [T*N, 23]");
    SeamCondT<S> cond =
        seam_condition(cx, enc_seam_, w.x_g, w.x_l, w.x_t, cfg.sincos_bands);
    Var h = seam_apply(cx, enc_seam_, t.constant(w.fm), cond, tile_index(w.T, w.N));
    h = run_blocks(cx, h, w, enc_spatial_, enc_temporal_, nullptr, nullptr);

    std::vector<Var> out;
    out.reserve(w.graphs());
    for (int g = 0; g < w.graphs(); ++g) {
      std::vector<Var> pooled;
      pooled.reserve(w.T);
      for (int f = 0; f < w.T; ++f) {
        Var rows = t.slice(h, 0, f * w.N + w.graph_offsets[g], w.graph_sizes[g]);
        pooled.push_back(t.max(rows, 0));
      }
      Var frames = w.T == 1 ? pooled[0] : t.concat(pooled, 0);
      out.push_back(pool_proj_.apply(cx, frames));
    }
    return out;
  }

  VaeOutT<S> bottleneck_vae(CtxT<S>& cx, Var pre) {
    auto& t = cx.tape;
    const int latent = cfg.bottleneck.latent;
    Var headed = vae_head_.apply(cx, pre);
    VaeOutT<S> out;
    out.mu = t.slice(headed, 1, 0, latent);
    out.logvar = t.slice(headed, 1, latent, latent);
    if (cx.train) {
      Rng rng(cx.next_key());
      TensorT<S> noise = ad::randn<S>({t.val(pre).shape[0], latent}, rng);
      Var sigma = t.exp_(t.scalar_mul(out.logvar, S(0.5)));
      out.sample = t.add(out.mu, t.hadamard(sigma, t.constant(noise)));
    } else {
      out.sample = out.mu;
    }
    return out;
  }

  // Greedy residual quantization with a straight-through estimator. Gradients
  // reach the codebooks only through the codebook alignment term.
  RvqOutT<S> bottleneck_rvq(CtxT<S>& cx, Var pre) {
    auto& t = cx.tape;
    const int latent = cfg.bottleneck.latent;
    const int T = t.val(pre).shape[0];
    const int K = cfg.bottleneck.quantizers;
    RvqOutT<S> out;
    out.indices.assign(T, std::vector<int>(K, 0));

    TensorT<S> residual = t.val(pre);  // value-space copy
    TensorT<S> quantized = TensorT<S>::zeros({T, latent});
    Var cb_loss;
    bool first = true;
    for (int k = 0; k < K; ++k) {
      std::vector<int> idx(T, 0);
      for (int row = 0; row < T; ++row) {
        const auto& cb = codebooks_[k];
        S best = std::numeric_limits<S>::max();
        int bi = 0;
        for (int c = 0; c < cb.shape[0]; ++c) {
          S d2 = S(0);
          for (int d = 0; d < latent; ++d) {
            S diff = residual.at(row, d) - cb.at(c, d);
            d2 += diff * diff;
          }
          if (d2 < best) {
            best = d2;
            bi = c;
          }
        }
        idx[row] = bi;
        out.indices[row][k] = bi;
      }
      // codebook pull toward the (stopgrad) residuals it was assigned
      Var sel = t.gather_rows(cx.pvar(codebooks_[k]), idx);
      Var diff = t.sub(t.constant(residual), sel);
      Var term = t.mean_all(t.hadamard(diff, diff));
      cb_loss = first ? term : t.add(cb_loss, term);
      first = false;
      for (int row = 0; row < T; ++row)
        for (int d = 0; d < latent; ++d) {
          S cv = codebooks_[k].at(idx[row], d);
          residual.at(row, d) -= cv;
          quantized.at(row, d) += cv;
        }
    }
    // straight-through: forward the quantized values, route gradients to pre
    Var delta = t.constant(sub_tensors(quantized, t.val(pre)));
    out.quantized = t.add(pre, delta);
    Var commit_diff = t.sub(pre, t.constant(quantized));
    out.commit_loss = t.mean_all(t.hadamard(commit_diff, commit_diff));
    out.codebook_loss = cb_loss;
    return out;
  }

  // Broadcast per-graph latents to the target skeleton's nodes and decode to
  // [T*N, 11] frame-major outputs.
  Var decode(CtxT<S>& cx, const std::vector<Var>& latents, const WindowInputT<S>& target) {
    auto& t = cx.tape;
    if (static_cast<int>(latents.size()) != target.graphs())
      throw Error("ShapeMismatch", "latent count != target graph count");
    Var lat_all = latents.size() == 1 ? latents[0] : t.concat(latents, 0);
    // row (t*N + j) pulls latent row (graph(j)*T + t)
    std::vector<int> idx(static_cast<size_t>(target.T) * target.N);
    for (int f = 0; f < target.T; ++f)
      for (int g = 0; g < target.graphs(); ++g)
        for (int j = 0; j < target.graph_sizes[g]; ++j)
          idx[static_cast<size_t>(f) * target.N + target.graph_offsets[g] + j] =
              g * target.T + f;
    Var broadcast = t.gather_rows(lat_all, idx);

    SeamCondT<S> cond =
        seam_condition(cx, dec_seam_, target.x_g, target.x_l, target.x_t, cfg.sincos_bands);
    Var h = seam_apply(cx, dec_seam_, broadcast, cond, tile_index(target.T, target.N));
    h = run_blocks(cx, h, target, dec_spatial_, dec_temporal_,
                   cfg.decoder_seam_per_block ? &dec_seam_ : nullptr,
                   cfg.decoder_seam_per_block ? &cond : nullptr);
    return head_.apply(cx, h);
  }

  std::vector<TensorT<S>>& codebooks() { return codebooks_; }
  SeamParamsT<S>& encoder_seam() { return enc_seam_; }
  SeamParamsT<S>& decoder_seam() { return dec_seam_; }
  SpatialBlockT<S>& encoder_spatial(int i) { return enc_spatial_[i]; }
  TemporalBlockT<S>& encoder_temporal(int i) { return enc_temporal_[i]; }

 private:
  SeamParamsT<S> enc_seam_, dec_seam_;
  std::vector<SpatialBlockT<S>> enc_spatial_, dec_spatial_;
  std::vector<TemporalBlockT<S>> enc_temporal_, dec_temporal_;
  LinearT<S> pool_proj_;
  LinearT<S> vae_head_;
  std::vector<TensorT<S>> codebooks_;
  Mlp2T<S> head_;

  static std::vector<int> tile_index(int T, int N) {
    std::vector<int> idx(static_cast<size_t>(T) * N);
    for (int f = 0; f < T; ++f)
      for (int j = 0; j < N; ++j) idx[static_cast<size_t>(f) * N + j] = j;
    return idx;
  }

  static TensorT<S> sub_tensors(const TensorT<S>& a, const TensorT<S>& b) {
    TensorT<S> out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
  }

  Var run_blocks(CtxT<S>& cx, Var h, const WindowInputT<S>& w,
                 std::vector<SpatialBlockT<S>>& spatial,
                 std::vector<TemporalBlockT<S>>& temporal, SeamParamsT<S>* reinject,
                 const SeamCondT<S>* cond) {
    auto& t = cx.tape;
    for (int b = 0; b < cfg.blocks_per_side; ++b) {
      if (reinject != nullptr && b > 0) {
        // optional per-block re-injection of the target modulation
        Var ln = t.layer_norm(h, t.constant(reinject->ln_gain),
                               t.constant(reinject->ln_bias));
        Var gamma = t.gather_rows(cond->gamma, tile_index(w.T, w.N));
        Var beta = t.gather_rows(cond->beta, tile_index(w.T, w.N));
        Var gate = t.gather_rows(cond->gate, tile_index(w.T, w.N));
        Var xhat = t.add(t.hadamard(ln, t.scalar_add(gamma, S(1))), beta);
        h = t.add(h, t.hadamard(gate, xhat));
      }
      Var edge_emb = spatial[b].edge_mlp.apply(cx, t.constant(w.edge_feats));
      std::vector<Var> frames;
      frames.reserve(w.T);
      for (int f = 0; f < w.T; ++f) {
        Var rows = t.slice(h, 0, f * w.N, w.N);
        frames.push_back(spatial_block(cx, spatial[b], rows, w, edge_emb));
      }
      h = w.T == 1 ? frames[0] : t.concat(frames, 0);
      if (cfg.temporal_blocks) h = temporal_block(cx, temporal[b], h, w.T, w.N);
    }
    return h;
  }
};

using SataModel = SataModelT<float>;

}  // namespace sata::model
