#include "eer/weights.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "eer/error.hpp"

namespace eer {

namespace {

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

void expect_shape(const Tensor& t, std::size_t rows, std::size_t cols, std::string_view name) {
  if (t.rows() != rows || t.cols() != cols) {
    throw ShapeError("ModelWeights: " + std::string(name) + " is " + shape_string(t) +
                     ", expected [" + std::to_string(rows) + "x" + std::to_string(cols) + "]");
  }
}

}  // namespace

ModelWeights ModelWeights::zeros(const ModelDims& dims) {
  const auto [d, f, v] = dims;
  return ModelWeights{Tensor(v, d), Tensor(d, d), Tensor(d, d),    Tensor(d, d),
                      Tensor(d, f), Tensor(1, f), Tensor(f, d),    Tensor(1, d),
                      Tensor(1, d), Tensor(1, d), Tensor(d, v)};
}

ModelWeights ModelWeights::initialize(const ModelDims& dims, Rng& rng) {
  const auto [d, f, v] = dims;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double sf = 1.0 / std::sqrt(static_cast<double>(f));
  ModelWeights w = zeros(dims);
  w.embed = uniform_tensor(v, d, 0.1, rng);
  w.w_q = uniform_tensor(d, d, sd, rng);
  w.w_k = uniform_tensor(d, d, sd, rng);
  w.w_v = uniform_tensor(d, d, sd, rng);
  w.mlp_in = uniform_tensor(d, f, sd, rng);
  w.mlp_out = uniform_tensor(f, d, sf, rng);
  w.norm_gain = Tensor::ones(1, d);
  w.readout = uniform_tensor(d, v, kReadoutInitScale, rng);
  return w;
}

void ModelWeights::validate() const {
  const auto [d, f, v] = dims();
  if (d == 0 || f == 0 || v == 0) throw ShapeError("ModelWeights: empty dimension");
  expect_shape(embed, v, d, "embed");
  expect_shape(w_q, d, d, "w_q");
  expect_shape(w_k, d, d, "w_k");
  expect_shape(w_v, d, d, "w_v");
  expect_shape(mlp_in, d, f, "mlp_in");
  expect_shape(mlp_in_bias, 1, f, "mlp_in_bias");
  expect_shape(mlp_out, f, d, "mlp_out");
  expect_shape(mlp_out_bias, 1, d, "mlp_out_bias");
  expect_shape(norm_gain, 1, d, "norm_gain");
  expect_shape(norm_bias, 1, d, "norm_bias");
  expect_shape(readout, d, v, "readout");
  for_each([](std::string_view name, const Tensor& t) {
    if (!t.all_finite()) throw NumericalError("ModelWeights: non-finite entry in " + std::string(name));
  });
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, const Tensor& t) { n += t.size(); });
  return n;
}

Tensor& ModelWeights::at(std::string_view name) {
  Tensor* found = nullptr;
  for_each([&](std::string_view n, Tensor& t) {
    if (n == name) found = &t;
  });
  if (found == nullptr) throw std::out_of_range("ModelWeights: unknown array " + std::string(name));
  return *found;
}

const Tensor& ModelWeights::at(std::string_view name) const {
  return const_cast<ModelWeights*>(this)->at(name);
}

}  // namespace eer
