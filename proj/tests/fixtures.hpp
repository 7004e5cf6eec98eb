#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "eer/autodiff.hpp"
#include "eer/gradcheck.hpp"
#include "eer/rng.hpp"
#include "eer/tensor.hpp"

namespace fixtures {

inline eer::Tensor random_tensor(eer::Rng& rng, std::size_t rows, std::size_t cols,
                                 double scale = 1.0) {
  eer::Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

/// Simplex sample; `sharpness` > 1 concentrates mass, exercising peaked rows.
inline std::vector<double> random_simplex(eer::Rng& rng, std::size_t n, double sharpness = 1.0) {
  std::vector<double> p(n);
  double total = 0.0;
  for (double& v : p) {
    v = std::pow(-std::log(1.0 - rng.uniform()), sharpness);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

inline eer::Tensor random_stochastic(eer::Rng& rng, std::size_t rows, std::size_t cols,
                                     double sharpness = 1.0) {
  eer::Tensor s(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto p = random_simplex(rng, cols, sharpness);
    for (std::size_t c = 0; c < cols; ++c) s(r, c) = p[c];
  }
  return s;
}

/// Max relative error between the tape gradient of `f` at `x` and central
/// differences.
inline double gradient_error(const std::function<eer::Var(const eer::Var&)>& f, const eer::Tensor& x) {
  eer::Tape tape;
  const eer::Var leaf = tape.leaf(x);
  const eer::Tensor analytic = tape.backward(f(leaf))[leaf];
  const eer::Tensor numeric = eer::finite_diff_gradient(
      [&](const eer::Tensor& t) { return f(eer::Var(t)).scalar(); }, x, eer::kGradCheckStep);
  return eer::max_relative_error(analytic, numeric);
}

}  // namespace fixtures
