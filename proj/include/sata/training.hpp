#pragma once

#include "sata/model.hpp"

namespace sata::training {

using ad::TensorT;
using ad::Var;

struct LossWeights {
  double w_rot = 1.0;
  double w_pos = 1.0;
  double w_vel = 0.5;
  double w_contact = 0.1;
  double w_penetration = 0.1;
  double w_smooth = 0.1;
  double w_bce = 0.1;   // predicted contact channel, cross-entropy
  double w_root = 1.0;  // root-row r channels
  double lambda_kl = 1e-4;
  double lambda_commit = 0.02;
  double lambda_codebook = 1.0;

  void validate() const {
    for (double v : {w_rot, w_pos, w_vel, w_contact, w_penetration, w_smooth, w_bce,
                     w_root, lambda_kl, lambda_commit, lambda_codebook})
      if (v < 0.0) throw Error("InvalidConfig", "loss weights must be >= 0");
  }
};

// Ground-truth side of one batched window, precomputed in double and frozen
// into constants.
template <class S>
struct WindowGtT {
  int T = 0;
  int N = 0;
  std::vector<int> graph_offsets, graph_sizes;
  std::vector<int> roots;               // global node index of each graph's root
  std::vector<int> parents;             // global node ids, -1 at roots
  std::vector<int> node_graph;          // node -> graph
  TensorT<S> rest_offsets;              // [N,3]
  TensorT<S> q;                         // [T*N,6]
  TensorT<S> contacts;                  // [T*N,1] flags
  TensorT<S> r_root;                    // [G*T,4] graph-major root channels
  std::vector<TensorT<S>> root_traj;    // per graph [T,3], integrated gt trajectory
  std::vector<TensorT<S>> positions;    // per node [T,3] gt global positions
  std::vector<int> foot_nodes;          // global node ids with contact semantics
  std::vector<double> ground;           // per graph ground level
};

struct WindowRef {
  const repr::MotionGraphSequence* seq = nullptr;
  int start = 0;
};

template <class S>
struct WindowBatchT {
  model::WindowInputT<S> input;
  WindowGtT<S> gt;
};

// Materializes window rows with loop padding (last frame repeated, velocity
// channels zeroed) and assembles both the model input and the ground truth.
template <class S>
WindowBatchT<S> make_window_batch(const std::vector<WindowRef>& refs, int window);

struct LossBreakdown {
  double rot = 0, pos = 0, vel = 0, contact = 0, penetration = 0, smooth = 0, bce = 0,
         root = 0, reg = 0, total = 0;
};

template <class S>
struct LossOutT {
  Var total;
  LossBreakdown values;
};

// Row-wise Gram-Schmidt from 6D rows to rotation-matrix rows [n,9]; the
// differentiable twin of the kinematics-side reconstruction.
template <class S>
Var gram_schmidt_rotmats(ad::TapeT<S>& t, Var sixd);

// Composite reconstruction loss of a decoded window against its ground
// truth. Positions are assembled by on-tape FK with the ground-truth
// horizontal trajectory and the predicted root height, so no integration of
// predictions is required.
template <class S>
LossOutT<S> reconstruction_loss(model::CtxT<S>& cx, Var decoder_out,
                                const WindowGtT<S>& gt, const LossWeights& w);

template <class S>
Var kl_loss(model::CtxT<S>& cx, Var mu, Var logvar) {
  auto& t = cx.tape;
  // mean of 0.5 * (exp(logvar) + mu^2 - 1 - logvar)
  Var term = t.sub(t.add(t.exp_(logvar), t.hadamard(mu, mu)),
                   t.scalar_add(logvar, S(1)));
  return t.scalar_mul(t.mean_all(term), S(0.5));
}

// One training epoch's batch plan: every clip once, shuffled, one uniform
// window start each; clips shorter than the window start at 0 and loop-pad.
std::vector<std::vector<WindowRef>> plan_epoch(
    const std::vector<repr::MotionGraphSequence>& dataset, int window, int batch_size,
    Rng& rng);

struct FitSettings {
  model::ModelConfig config;
  LossWeights weights;
  int epochs = 100;
  int max_steps = 0;  // 0 = bounded by epochs only
  int batch_size = 4;
  double base_lr = 1e-4;
  int warmup_epochs = 30;
  double lr_gamma = 0.99;
  double lr_min_factor = 0.01;
  uint64_t seed = 0;
  std::string log_path;   // JSONL, one object per epoch, when set
  std::string ckpt_path;  // final checkpoint, when set
  int ckpt_every = 0;     // also write every N epochs
  int dead_code_steps = 50;  // RVQ dead-code reset horizon
};

struct FitReport {
  int steps = 0;
  int epochs = 0;
  LossBreakdown final_loss;
  double codebook_utilization = 0.0;  // RVQ only, last epoch
};

std::unique_ptr<model::SataModel> fit(const FitSettings& settings,
                                      const std::vector<repr::MotionGraphSequence>& dataset,
                                      FitReport* report = nullptr);

// ---- template implementations ----

template <class S>
Var gram_schmidt_rotmats(ad::TapeT<S>& t, Var sixd) {
  const S eps = S(1e-12);
  Var a = t.slice(sixd, 1, 0, 3);
  Var b = t.slice(sixd, 1, 3, 3);
  Var na = t.sqrt_(t.scalar_add(t.sum(t.hadamard(a, a), 1), eps));
  Var c1 = t.divide(a, t.broadcast_cols(na, 3));
  Var proj = t.sum(t.hadamard(c1, b), 1);
  Var b_orth = t.sub(b, t.hadamard(t.broadcast_cols(proj, 3), c1));
  Var nb = t.sqrt_(t.scalar_add(t.sum(t.hadamard(b_orth, b_orth), 1), eps));
  Var c2 = t.divide(b_orth, t.broadcast_cols(nb, 3));
  auto col = [&](Var v, int i) { return t.slice(v, 1, i, 1); };
  // c3 = c1 x c2
  Var c3x = t.sub(t.hadamard(col(c1, 1), col(c2, 2)), t.hadamard(col(c1, 2), col(c2, 1)));
  Var c3y = t.sub(t.hadamard(col(c1, 2), col(c2, 0)), t.hadamard(col(c1, 0), col(c2, 2)));
  Var c3z = t.sub(t.hadamard(col(c1, 0), col(c2, 1)), t.hadamard(col(c1, 1), col(c2, 0)));
  // rows of [n,9] store the matrix row-major with columns (c1, c2, c3)
  return t.concat({col(c1, 0), col(c2, 0), c3x, col(c1, 1), col(c2, 1), c3y, col(c1, 2),
                   col(c2, 2), c3z},
                  1);
}

template <class S>
WindowBatchT<S> make_window_batch(const std::vector<WindowRef>& refs, int window) {
  if (refs.empty()) throw Error("EmptyDataset", "no windows in batch");
  WindowBatchT<S> out;
  const int T = window;

  std::vector<model::GraphStaticsT<S>> statics;
  statics.reserve(refs.size());
  for (const auto& ref : refs) statics.push_back(model::graph_statics_from<S>(*ref.seq));
  out.input = model::batch_graphs(statics, T);
  const int N = out.input.N;

  WindowGtT<S>& gt = out.gt;
  gt.T = T;
  gt.N = N;
  gt.graph_offsets = out.input.graph_offsets;
  gt.graph_sizes = out.input.graph_sizes;
  gt.parents.assign(N, -1);
  gt.node_graph.assign(N, 0);
  gt.rest_offsets = TensorT<S>::zeros({N, 3});
  gt.q = TensorT<S>::zeros({T * N, 6});
  gt.contacts = TensorT<S>::zeros({T * N, 1});
  gt.r_root = TensorT<S>::zeros({static_cast<int>(refs.size()) * T, 4});
  out.input.fm = TensorT<S>::zeros({T * N, repr::kDynWidth});

  for (size_t g = 0; g < refs.size(); ++g) {
    const auto& seq = *refs[g].seq;
    const int J = seq.joint_count;
    const int off = gt.graph_offsets[g];
    const int clip_T = seq.frame_count();
    gt.roots.push_back(off + seq.root());
    for (int j = 0; j < J; ++j) {
      gt.node_graph[off + j] = static_cast<int>(g);
      if (seq.parents[j] >= 0) gt.parents[off + j] = off + seq.parents[j];
      for (int d = 0; d < 3; ++d)
        gt.rest_offsets.at(off + j, d) = static_cast<S>(seq.statics.x_local[j][d]);
    }
    for (int j : seq.contact_joints) gt.foot_nodes.push_back(off + j);

    // window rows with loop padding
    std::vector<const float*> rows(T);
    std::vector<std::vector<float>> padded;
    for (int f = 0; f < T; ++f) {
      int src = refs[g].start + f;
      if (src < clip_T) {
        rows[f] = seq.frames[src].data();
      } else {
        std::vector<float> r = seq.frames[clip_T - 1];
        for (int j = 0; j < J; ++j) {
          float* d = r.data() + j * repr::kDynWidth;
          for (int k = 0; k < 6; ++k) d[repr::kVqOff + k] = 0.0f;
          for (int k = 0; k < 3; ++k) d[repr::kVxOff + k] = 0.0f;
          d[repr::kROff + 0] = d[repr::kROff + 1] = d[repr::kROff + 2] = 0.0f;
        }
        padded.push_back(std::move(r));
        rows[f] = padded.back().data();
      }
    }

    // gt tensors + window-local trajectory (yaw 0, origin at window start)
    TensorT<S> traj = TensorT<S>::zeros({T, 3});
    double yaw = 0.0;
    Eigen::Vector3d pos(0, 0, 0);
    std::vector<std::vector<Eigen::Quaterniond>> rots(T, std::vector<Eigen::Quaterniond>(J));
    for (int f = 0; f < T; ++f) {
      const float* row = rows[f];
      const float* root_row = row + seq.root() * repr::kDynWidth;
      if (f > 0) {
        double prev_yaw = yaw;
        yaw += root_row[repr::kROff + 0];
        Eigen::Vector3d v(root_row[repr::kROff + 1], 0.0, root_row[repr::kROff + 2]);
        pos += Eigen::AngleAxisd(prev_yaw, Eigen::Vector3d::UnitY()) * v;
      }
      pos.y() = root_row[repr::kROff + 3];
      for (int d = 0; d < 3; ++d) traj.at(f, d) = static_cast<S>(pos(d));
      for (int k = 0; k < 4; ++k)
        gt.r_root.at(static_cast<int>(g) * T + f, k) =
            static_cast<S>(root_row[repr::kROff + k]);
      for (int j = 0; j < J; ++j) {
        const float* d = row + j * repr::kDynWidth;
        for (int k = 0; k < repr::kDynWidth; ++k)
          out.input.fm.at(f * N + off + j, k) = static_cast<S>(d[k]);
        for (int k = 0; k < 6; ++k) gt.q.at(f * N + off + j, k) = static_cast<S>(d[repr::kQOff + k]);
        gt.contacts.at(f * N + off + j, 0) = static_cast<S>(d[repr::kCOff]);
        kin::SixD s;
        s.a = Eigen::Vector3d(d[0], d[1], d[2]);
        s.b = Eigen::Vector3d(d[3], d[4], d[5]);
        try {
          rots[f][j] = kin::sixd_to_quat(s);
        } catch (const Error&) {
          rots[f][j] = Eigen::Quaterniond::Identity();
        }
      }
    }
    gt.root_traj.push_back(traj);

    // gt global positions by plain FK against the window-local trajectory,
    // in topological order over the parent links
    std::vector<int> order;
    order.reserve(J);
    {
      std::vector<char> placed(J, 0);
      for (int pass = 0; static_cast<int>(order.size()) < J; ++pass) {
        if (pass > J) throw Error("CrossGraphEdge", "parent links contain a cycle");
        for (int i = 0; i < J; ++i)
          if (!placed[i] && (seq.parents[i] < 0 || placed[seq.parents[i]])) {
            placed[i] = 1;
            order.push_back(i);
          }
      }
    }
    std::vector<TensorT<S>> node_pos(J, TensorT<S>::zeros({T, 3}));
    for (int f = 0; f < T; ++f) {
      std::vector<Eigen::Vector3d> pos_f(J);
      std::vector<Eigen::Quaterniond> glob(J);
      for (int j : order) {
        int p = seq.parents[j];
        if (p < 0) {
          pos_f[j] = Eigen::Vector3d(traj.at(f, 0), traj.at(f, 1), traj.at(f, 2));
          glob[j] = rots[f][j];
        } else {
          Eigen::Vector3d offv(seq.statics.x_local[j][0], seq.statics.x_local[j][1],
                               seq.statics.x_local[j][2]);
          pos_f[j] = pos_f[p] + glob[p] * offv;
          glob[j] = glob[p] * rots[f][j];
        }
        for (int d = 0; d < 3; ++d) node_pos[j].at(f, d) = static_cast<S>(pos_f[j](d));
      }
    }
    for (auto& np : node_pos) gt.positions.push_back(std::move(np));

    // ground level per graph over the window's contact joints
    std::vector<double> heights;
    for (int f = 0; f < T; ++f)
      for (int j : seq.contact_joints)
        heights.push_back(gt.positions[off + j].at(f, 1));
    if (heights.empty()) {
      gt.ground.push_back(0.0);
    } else {
      std::sort(heights.begin(), heights.end());
      gt.ground.push_back(heights[static_cast<size_t>(0.02 * (heights.size() - 1))]);
    }
  }
  return out;
}

template <class S>
LossOutT<S> reconstruction_loss(model::CtxT<S>& cx, Var decoder_out,
                                const WindowGtT<S>& gt, const LossWeights& w) {
  auto& t = cx.tape;
  const int T = gt.T;
  const int N = gt.N;
  if (t.val(decoder_out).shape != ad::Shape{T * N, repr::kOutWidth})
    throw Error("ShapeMismatch", "decoder output must be [T*N, 11]");

  LossOutT<S> out;
  auto weighted = [&](Var term, double weight, double* slot) -> Var {
    *slot = static_cast<double>(t.val(term).data[0]);
    return t.scalar_mul(term, static_cast<S>(weight));
  };

  // rotation channels
  Var pred_q = t.slice(decoder_out, 1, 0, 6);
  Var dq = t.sub(pred_q, t.constant(gt.q));
  Var rot_term = t.mean_all(t.hadamard(dq, dq));

  // root-row r channels, graph-major [G*T, 4]
  std::vector<int> root_rows;
  for (size_t g = 0; g < gt.roots.size(); ++g)
    for (int f = 0; f < T; ++f) root_rows.push_back(f * N + gt.roots[g]);
  Var pred_r = t.slice(t.gather_rows(decoder_out, root_rows), 1, 6, 4);
  Var dr = t.sub(pred_r, t.constant(gt.r_root));
  Var root_term = t.mean_all(t.hadamard(dr, dr));

  // contact channel (logits) against gt flags
  Var bce_term = t.mean_all(t.bce_with_logits(t.slice(decoder_out, 1, 10, 1), gt.contacts));

  // on-tape FK: predicted rotations, gt horizontal trajectory, predicted height
  Var rotmats = gram_schmidt_rotmats(t, pred_q);
  std::vector<Var> node_rot(N), node_pos(N);
  // topological order over the forest (parents before children)
  std::vector<int> order;
  order.reserve(N);
  {
    std::vector<char> placed(N, 0);
    for (int pass = 0; static_cast<int>(order.size()) < N; ++pass) {
      if (pass > N) throw Error("CrossGraphEdge", "parent links contain a cycle");
      for (int i = 0; i < N; ++i)
        if (!placed[i] && (gt.parents[i] < 0 || placed[gt.parents[i]])) {
          placed[i] = 1;
          order.push_back(i);
        }
    }
  }
  for (int j : order) {
    std::vector<int> rows(T);
    for (int f = 0; f < T; ++f) rows[f] = f * N + j;
    Var local = t.gather_rows(rotmats, rows);
    int p = gt.parents[j];
    if (p < 0) {
      int g = gt.node_graph[j];
      // x/z from the gt trajectory, y from the predicted root height
      TensorT<S> xz = gt.root_traj[g];
      Var h_pred = t.slice(t.gather_rows(decoder_out, rows), 1, 9, 1);
      TensorT<S> x_col = TensorT<S>::zeros({T, 1});
      TensorT<S> z_col = TensorT<S>::zeros({T, 1});
      for (int f = 0; f < T; ++f) {
        x_col.at(f, 0) = xz.at(f, 0);
        z_col.at(f, 0) = xz.at(f, 2);
      }
      node_pos[j] = t.concat({t.constant(x_col), h_pred, t.constant(z_col)}, 1);
      node_rot[j] = local;
    } else {
      TensorT<S> off_tiled = TensorT<S>::zeros({T, 3});
      for (int f = 0; f < T; ++f)
        for (int d = 0; d < 3; ++d) off_tiled.at(f, d) = gt.rest_offsets.at(j, d);
      node_pos[j] = t.add(node_pos[p], t.rotmat_apply(node_rot[p], t.constant(off_tiled)));
      node_rot[j] = t.rotmat_compose(node_rot[p], local);
    }
  }

  // position MSE + velocity MSE + smoothness, accumulated per node
  Var pos_acc, vel_acc, smooth_acc;
  bool first = true;
  for (int j = 0; j < N; ++j) {
    Var diff = t.sub(node_pos[j], t.constant(gt.positions[j]));
    Var p_term = t.sum_all(t.hadamard(diff, diff));
    Var v_term, s_term;
    if (T > 1) {
      Var pv = t.sub(t.slice(node_pos[j], 0, 1, T - 1), t.slice(node_pos[j], 0, 0, T - 1));
      TensorT<S> gv = TensorT<S>::zeros({T - 1, 3});
      for (int f = 0; f + 1 < T; ++f)
        for (int d = 0; d < 3; ++d)
          gv.at(f, d) = gt.positions[j].at(f + 1, d) - gt.positions[j].at(f, d);
      Var dv = t.sub(pv, t.constant(gv));
      v_term = t.sum_all(t.hadamard(dv, dv));
    }
    if (T > 2) {
      // second difference of the position residual; vanishes at the ground
      // truth while still damping frame-to-frame jitter
      Var mid = t.slice(diff, 0, 1, T - 2);
      Var acc = t.add(t.sub(t.slice(diff, 0, 2, T - 2), t.scalar_mul(mid, S(2))),
                      t.slice(diff, 0, 0, T - 2));
      s_term = t.sum_all(t.hadamard(acc, acc));
    }
    if (first) {
      pos_acc = p_term;
      if (T > 1) vel_acc = v_term;
      if (T > 2) smooth_acc = s_term;
      first = false;
    } else {
      pos_acc = t.add(pos_acc, p_term);
      if (T > 1) vel_acc = t.add(vel_acc, v_term);
      if (T > 2) smooth_acc = t.add(smooth_acc, s_term);
    }
  }
  Var pos_term = t.scalar_mul(pos_acc, S(1) / static_cast<S>(T * N * 3));
  Var vel_term = T > 1 ? t.scalar_mul(vel_acc, S(1) / static_cast<S>((T - 1) * N * 3))
                       : t.constant(TensorT<S>::scalar(S(0)));
  Var smooth_term = T > 2 ? t.scalar_mul(smooth_acc, S(1) / static_cast<S>((T - 2) * N))
                          : t.constant(TensorT<S>::scalar(S(0)));

  // foot contact: squared horizontal speed of predicted feet on gt-contact frames
  Var contact_acc;
  int contact_count = 0;
  bool c_first = true;
  for (int j : gt.foot_nodes) {
    if (T < 2) break;
    TensorT<S> mask = TensorT<S>::zeros({T - 1, 1});
    for (int f = 1; f < T; ++f) {
      if (gt.contacts.at(f * N + j, 0) > S(0.5)) {
        mask.at(f - 1, 0) = S(1);
        ++contact_count;
      }
    }
    Var v = t.sub(t.slice(node_pos[j], 0, 1, T - 1), t.slice(node_pos[j], 0, 0, T - 1));
    Var vx = t.slice(v, 1, 0, 1);
    Var vz = t.slice(v, 1, 2, 1);
    Var sq = t.add(t.hadamard(vx, vx), t.hadamard(vz, vz));
    Var masked = t.sum_all(t.hadamard(sq, t.constant(mask)));
    contact_acc = c_first ? masked : t.add(contact_acc, masked);
    c_first = false;
  }
  Var contact_term = contact_count > 0
                         ? t.scalar_mul(contact_acc, S(1) / static_cast<S>(contact_count))
                         : t.constant(TensorT<S>::scalar(S(0)));

  // ground penetration of predicted feet below the gt-estimated ground
  Var pen_acc;
  bool p_first = true;
  for (int j : gt.foot_nodes) {
    Var y = t.slice(node_pos[j], 1, 1, 1);
    Var depth = t.relu(t.scalar_mul(t.scalar_add(y, static_cast<S>(-gt.ground[gt.node_graph[j]])), S(-1)));
    Var term = t.sum_all(t.hadamard(depth, depth));
    pen_acc = p_first ? term : t.add(pen_acc, term);
    p_first = false;
  }
  Var pen_term = !gt.foot_nodes.empty()
                     ? t.scalar_mul(pen_acc, S(1) / static_cast<S>(gt.foot_nodes.size() * T))
                     : t.constant(TensorT<S>::scalar(S(0)));

  LossBreakdown& v = out.values;
  Var total = weighted(rot_term, w.w_rot, &v.rot);
  total = t.add(total, weighted(pos_term, w.w_pos, &v.pos));
  total = t.add(total, weighted(vel_term, w.w_vel, &v.vel));
  total = t.add(total, weighted(contact_term, w.w_contact, &v.contact));
  total = t.add(total, weighted(pen_term, w.w_penetration, &v.penetration));
  total = t.add(total, weighted(smooth_term, w.w_smooth, &v.smooth));
  total = t.add(total, weighted(bce_term, w.w_bce, &v.bce));
  total = t.add(total, weighted(root_term, w.w_root, &v.root));
  out.total = total;
  v.total = static_cast<double>(t.val(total).data[0]);
  return out;
}

}  // namespace sata::training
