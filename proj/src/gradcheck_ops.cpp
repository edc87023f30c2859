#include "sata/gradcheck.hpp"

namespace sata::gradcheck {

using ad::Var;

std::vector<CheckResult> run_op_suite(uint64_t seed) {
  Rng rng(seed);
  std::vector<CheckResult> out;
  auto add = [&](CheckResult r) { out.push_back(std::move(r)); };

  DTensor a = smooth_random({4, 6}, rng);
  DTensor b = smooth_random({6, 5}, rng);
  DTensor c = smooth_random({4, 6}, rng);
  DTensor row = smooth_random({1, 6}, rng);
  DTensor col = smooth_random({4, 1}, rng);
  DTensor pos = smooth_random({4, 6}, rng);
  for (auto& v : pos.data) v = std::abs(v) + 0.5;  // log/sqrt domain
  // Fixed weighting constants so each build function is deterministic.
  DTensor w8x6 = smooth_random({8, 6}, rng);
  DTensor w4x12 = smooth_random({4, 12}, rng);
  DTensor w2x6 = smooth_random({2, 6}, rng);
  DTensor w4x3 = smooth_random({4, 3}, rng);
  DTensor w1x6 = smooth_random({1, 6}, rng);
  DTensor w4x1 = smooth_random({4, 1}, rng);
  DTensor w5x6 = smooth_random({5, 6}, rng);
  DTensor w3x9 = smooth_random({3, 9}, rng);
  DTensor w3x3 = smooth_random({3, 3}, rng);

  add(check("matmul", {&a, &b}, [&](DTape& t) {
    return t.sum_all(t.matmul(t.leaf(a), t.leaf(b)));
  }));
  add(check("transpose", {&a}, [&](DTape& t) {
    return t.sum_all(t.matmul(t.transpose(t.leaf(a)), t.constant(c)));
  }));
  add(check("add", {&a, &c}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.add(t.leaf(a), t.leaf(c)), t.constant(pos)));
  }));
  add(check("add_row_broadcast", {&a, &row}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.add(t.leaf(a), t.leaf(row)), t.constant(pos)));
  }));
  add(check("sub_scalar_broadcast", {&a}, [&](DTape& t) {
    Var s = t.constant(DTensor::scalar(0.7));
    return t.sum_all(t.hadamard(t.sub(t.leaf(a), s), t.constant(pos)));
  }));
  add(check("hadamard", {&a, &c}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.leaf(a), t.leaf(c)));
  }));
  add(check("divide", {&a, &pos}, [&](DTape& t) {
    return t.sum_all(t.divide(t.leaf(a), t.leaf(pos)));
  }));
  add(check("scalar_mul", {&a}, [&](DTape& t) {
    return t.sum_all(t.scalar_mul(t.leaf(a), 1.7));
  }));
  add(check("concat_axis0", {&a, &c}, [&](DTape& t) {
    return t.sum_all(
        t.hadamard(t.concat({t.leaf(a), t.leaf(c)}, 0), t.constant(w8x6)));
  }));
  add(check("concat_axis1", {&a, &c}, [&](DTape& t) {
    return t.sum_all(
        t.hadamard(t.concat({t.leaf(a), t.leaf(c)}, 1), t.constant(w4x12)));
  }));
  add(check("slice_rows", {&a}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.slice(t.leaf(a), 0, 1, 2), t.constant(w2x6)));
  }));
  add(check("slice_cols", {&a}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.slice(t.leaf(a), 1, 2, 3), t.constant(w4x3)));
  }));
  add(check("sum_axis0", {&a}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.sum(t.leaf(a), 0), t.constant(w1x6)));
  }));
  add(check("mean_axis1", {&a}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.mean(t.leaf(a), 1), t.constant(w4x1)));
  }));
  add(check("max_axis1", {&a}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.max(t.leaf(a), 1), t.constant(w4x1)));
  }));
  add(check("max_axis0", {&a}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.max(t.leaf(a), 0), t.constant(w1x6)));
  }));
  add(check("relu", {&a}, [&](DTape& t) { return t.sum_all(t.relu(t.leaf(a))); }));
  add(check("sigmoid", {&a}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.sigmoid(t.leaf(a)), t.constant(pos)));
  }));
  add(check("tanh", {&a}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.tanh_(t.leaf(a)), t.constant(pos)));
  }));
  add(check("exp", {&a}, [&](DTape& t) { return t.sum_all(t.exp_(t.leaf(a))); }));
  add(check("log", {&pos}, [&](DTape& t) { return t.sum_all(t.log_(t.leaf(pos))); }));
  add(check("sqrt", {&pos}, [&](DTape& t) { return t.sum_all(t.sqrt_(t.leaf(pos))); }));
  add(check("softmax", {&a}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.softmax(t.leaf(a), 1), t.constant(pos)));
  }));
  {
    DTensor gain = smooth_random({1, 6}, rng);
    DTensor bias = smooth_random({1, 6}, rng);
    add(check("layer_norm", {&a, &gain, &bias}, [&](DTape& t) {
      return t.sum_all(t.hadamard(t.layer_norm(t.leaf(a), t.leaf(gain), t.leaf(bias)),
                                  t.constant(pos)));
    }));
  }
  add(check("dropout", {&a}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.dropout(t.leaf(a), 0.3, true, 99), t.constant(pos)));
  }));
  {
    std::vector<int> idx = {2, 0, 3, 3, 1};
    add(check("gather_rows", {&a}, [&](DTape& t) {
      return t.sum_all(t.hadamard(t.gather_rows(t.leaf(a), idx), t.constant(w5x6)));
    }));
    DTensor e = smooth_random({5, 6}, rng);
    add(check("scatter_add_rows", {&e}, [&](DTape& t) {
      return t.sum_all(t.hadamard(t.scatter_add_rows(t.leaf(e), idx, 4), t.constant(pos)));
    }));
  }
  add(check("broadcast_rows", {&row}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.broadcast_rows(t.leaf(row), 4), t.constant(pos)));
  }));
  add(check("broadcast_cols", {&col}, [&](DTape& t) {
    return t.sum_all(t.hadamard(t.broadcast_cols(t.leaf(col), 6), t.constant(pos)));
  }));
  {
    DTensor r1 = smooth_random({3, 9}, rng);
    DTensor r2 = smooth_random({3, 9}, rng);
    DTensor v = smooth_random({3, 3}, rng);
    add(check("rotmat_compose", {&r1, &r2}, [&](DTape& t) {
      return t.sum_all(
          t.hadamard(t.rotmat_compose(t.leaf(r1), t.leaf(r2)), t.constant(w3x9)));
    }));
    add(check("rotmat_apply", {&r1, &v}, [&](DTape& t) {
      return t.sum_all(
          t.hadamard(t.rotmat_apply(t.leaf(r1), t.leaf(v)), t.constant(w3x3)));
    }));
  }
  {
    DTensor targets = DTensor::zeros({4, 6});
    Rng r2(seed + 1);
    for (auto& v : targets.data) v = r2.uniform_double() < 0.5 ? 0.0 : 1.0;
    add(check("bce_with_logits", {&a}, [&](DTape& t) {
      return t.sum_all(t.bce_with_logits(t.leaf(a), targets));
    }));
  }
  return out;
}

}  // namespace sata::gradcheck
