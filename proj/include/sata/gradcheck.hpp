#pragma once

// Central finite-difference checks for the tensor engine and composite
// blocks. Runs in the 64-bit instantiation of the engine; independent of the
// backward implementation it verifies.

#include <functional>
#include <string>
#include <vector>

#include "sata/tape.hpp"

namespace sata::gradcheck {

using DTensor = ad::TensorT<double>;
using DTape = ad::TapeT<double>;

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Compares analytic gradients of a scalar-valued build function against
// central differences for every element of every parameter.
inline CheckResult check(const std::string& name, std::vector<DTensor*> params,
                         const std::function<ad::Var(DTape&)>& build, double h = 1e-3,
                         double tol = 1e-3) {
  for (auto* p : params) {
    p->enable_grad();
    p->zero_grad();
  }
  {
    DTape tape;
    ad::Var loss = build(tape);
    tape.backward(loss);
  }
  auto eval = [&]() {
    DTape tape;
    return tape.val(build(tape)).data[0];
  };
  CheckResult res{name, 0.0, true};
  for (auto* p : params) {
    for (size_t i = 0; i < p->data.size(); ++i) {
      double keep = p->data[i];
      p->data[i] = keep + h;
      double fp = eval();
      p->data[i] = keep - h;
      double fm = eval();
      p->data[i] = keep;
      double fd = (fp - fm) / (2.0 * h);
      double an = p->grad[i];
      double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
      double rel = std::abs(fd - an) / denom;
      res.max_rel_err = std::max(res.max_rel_err, rel);
    }
  }
  res.pass = res.max_rel_err < tol;
  return res;
}

// Random values bounded away from kinks (relu/max) by at least margin.
inline DTensor smooth_random(ad::Shape shape, Rng& rng, double margin = 0.05) {
  DTensor t = DTensor::zeros(std::move(shape));
  for (auto& v : t.data) {
    double x = rng.uniform_double() * 0.9 + margin + 0.05;
    v = rng.uniform_double() < 0.5 ? -x : x;
  }
  return t;
}

// Finite-difference suite over every primitive op, including broadcast and
// gather/scatter paths.
std::vector<CheckResult> run_op_suite(uint64_t seed);

// SeAM, spatial block, temporal block, VAE head, RVQ straight-through, and
// the composite training loss on a toy skeleton.
std::vector<CheckResult> run_composite_suite(uint64_t seed);

}  // namespace sata::gradcheck
