// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "stemit/autograd.hpp"

namespace stemit::num {

struct GradCheckReport {
  std::string name;
  std::string worst_param;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Compares `analytic` against central differences of `f` in every
/// coordinate of `p.value`. The parameter is restored before returning.
inline GradCheckReport compare_gradient(const std::function<double()>& f, const Tensor& analytic,
                                        Parameter& p, double h, double tol) {
  if (!(h > 0.0)) throw ContractError("finite_diff_check: step must be positive");
  require_same_shape(analytic, p.value, "finite_diff_check");
  GradCheckReport r;
  r.name = p.name;
  r.worst_param = p.name;
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double orig = p.value[i];
    p.value[i] = orig + h;
    const double fp = f();
    p.value[i] = orig - h;
    const double fm = f();
    p.value[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double err = relative_error(analytic[i], numeric);
    if (err > r.max_rel_error || r.checked == 0) {
      r.max_rel_error = err;
      r.worst_index = i;
      r.worst_analytic = analytic[i];
      r.worst_numeric = numeric;
    }
    ++r.checked;
  }
  r.passed = r.max_rel_error < tol;
  return r;
}

/// Builds the scalar graph with `build`, backpropagates it to get the
/// analytic gradient for `p`, then checks it against central differences.
/// Every parameter's gradient is restored afterwards.
inline GradCheckReport finite_diff_check(const std::function<Var(Tape&)>& build, Parameter& p,
                                         double h = 1e-5, double tol = 1e-4) {
  Tensor analytic;
  {
    Tape tape;
    Var loss = build(tape);
    std::vector<Parameter*> bound = tape.bound_params();
    std::vector<Tensor> saved;
    for (Parameter* q : bound) {
      saved.push_back(q->gradient);
      q->zero_grad();
    }
    const Tensor p_saved = p.gradient;
    p.zero_grad();
    tape.backward(loss);
    analytic = p.gradient;
    p.gradient = p_saved;
    for (std::size_t i = 0; i < bound.size(); ++i) bound[i]->gradient = saved[i];
  }
  auto value_of = [&build] {
    Tape tape(false);
    return build(tape).value()[0];
  };
  return compare_gradient(value_of, analytic, p, h, tol);
}

/// Runs finite_diff_check for each parameter and merges into a single report
/// carrying the worst coordinate.
inline GradCheckReport finite_diff_check_all(const std::string& name,
                                             const std::function<Var(Tape&)>& build,
                                             const std::vector<Parameter*>& params,
                                             double h = 1e-5, double tol = 1e-4) {
  GradCheckReport merged;
  merged.name = name;
  for (Parameter* p : params) {
    GradCheckReport r = finite_diff_check(build, *p, h, tol);
    if (r.max_rel_error > merged.max_rel_error || merged.checked == 0) {
      merged.max_rel_error = r.max_rel_error;
      merged.worst_param = r.worst_param;
      merged.worst_index = r.worst_index;
      merged.worst_analytic = r.worst_analytic;
      merged.worst_numeric = r.worst_numeric;
    }
    merged.checked += r.checked;
  }
  merged.passed = merged.max_rel_error < tol;
  return merged;
}

}  // namespace stemit::num
