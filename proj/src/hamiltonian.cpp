#include "eer/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "eer/error.hpp"

namespace eer {

namespace {

void check_inputs(const Tensor& z, const Tensor& x, const ModelWeights& weights, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("dynamics: tau must be positive");
  if (x.rows() == 0) throw std::invalid_argument("dynamics: empty token set");
  const std::size_t d = weights.w_q.rows();
  if (z.rows() != 1 || z.cols() != d || x.cols() != d) {
    throw ShapeError("dynamics: latent " + shape_string(z) + " / tokens " + shape_string(x) +
                     " do not match d = " + std::to_string(d));
  }
}

/// Raw scores s_i (before the 1/τ).
Tensor scores(const Tensor& z, const Tensor& x, const ModelWeights& weights) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(weights.w_q.rows()));
  return matmul_nt(matmul(z, weights.w_q), matmul(x, weights.w_k)) * inv_sqrt_d;
}

}  // namespace

double DynamicsParams::beta(std::size_t k) const {
  return beta_schedule.size() == 1 ? beta_schedule.front() : beta_schedule.at(k);
}

void DynamicsParams::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("DynamicsParams: tau must be positive");
  if (steps < 1) throw std::invalid_argument("DynamicsParams: steps must be >= 1");
  if (beta_schedule.empty() || (beta_schedule.size() != 1 && beta_schedule.size() < steps)) {
    throw std::invalid_argument("DynamicsParams: beta schedule must be constant or cover every step");
  }
}

Tensor retrieval_weights(const Tensor& z, const Tensor& x, const ModelWeights& weights,
                         double tau) {
  check_inputs(z, x, weights, tau);
  return row_softmax(scores(z, x, weights), tau);
}

Tensor soft_retrieval(const Tensor& z, const Tensor& x, const ModelWeights& weights, double tau) {
  return matmul(retrieval_weights(z, x, weights, tau), matmul(x, weights.w_v));
}

double attention_energy(const Tensor& z, const Tensor& x, const ModelWeights& weights,
                        double tau) {
  check_inputs(z, x, weights, tau);
  const Tensor s = scores(z, x, weights);
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : s.data()) mx = std::max(mx, v / tau);
  double acc = 0.0;
  for (double v : s.data()) acc += std::exp(v / tau - mx);
  return -tau * (mx + std::log(acc));
}

Tensor energy_gradient(const Tensor& z, const Tensor& x, const ModelWeights& weights, double tau) {
  const Tensor sigma = retrieval_weights(z, x, weights, tau);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(weights.w_q.rows()));
  const Tensor mean_key = matmul(sigma, matmul(x, weights.w_k));
  return matmul_nt(mean_key, weights.w_q) * (-inv_sqrt_d);
}

HamiltonianState hamiltonian_step(const HamiltonianState& state, const Tensor& x,
                                  const ModelWeights& weights, const DynamicsParams& params,
                                  std::size_t k) {
  if (k >= params.steps) throw std::out_of_range("hamiltonian_step: step index beyond horizon");
  require_same_shape(state.z, state.v, "hamiltonian_step");
  Tensor v = state.v * params.mu;
  if (params.alpha != 0.0) {
    v.add_scaled(soft_retrieval(state.z, x, weights, params.tau) - state.z, params.alpha);
  }
  const double beta = params.beta(k);
  if (beta != 0.0) v.add_scaled(energy_gradient(state.z, x, weights, params.tau), -beta);
  Tensor z = state.z + v;
  return {std::move(z), std::move(v)};
}

std::vector<TrajectoryPoint> simulate_trajectory(const Tensor& z0, const Tensor& x,
                                                 const ModelWeights& weights,
                                                 const DynamicsParams& params,
                                                 const std::optional<Tensor>& v0) {
  params.validate();
  check_inputs(z0, x, weights, params.tau);
  HamiltonianState state{z0, v0 ? *v0 : Tensor(1, z0.cols())};
  require_same_shape(state.z, state.v, "simulate_trajectory");
  auto point = [&](const HamiltonianState& s) {
    const double ke = 0.5 * dot(s.v, s.v);
    return TrajectoryPoint{s, ke, attention_energy(s.z, x, weights, params.tau)};
  };
  std::vector<TrajectoryPoint> out;
  out.reserve(params.steps + 1);
  out.push_back(point(state));
  for (std::size_t k = 0; k < params.steps; ++k) {
    state = hamiltonian_step(state, x, weights, params, k);
    if (!state.z.all_finite() || !state.v.all_finite()) {
      throw NumericalError("simulate_trajectory: state diverged at step " + std::to_string(k + 1));
    }
    out.push_back(point(state));
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryPoint>& trajectory) {
  const std::size_t d = trajectory.empty() ? 0 : trajectory.front().state.z.cols();
  os << "step";
  for (std::size_t i = 0; i < d; ++i) os << ",z" << i;
  for (std::size_t i = 0; i < d; ++i) os << ",v" << i;
  os << ",kinetic,potential\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const auto& p = trajectory[k];
    os << k;
    for (double v : p.state.z.data()) os << ',' << v;
    for (double v : p.state.v.data()) os << ',' << v;
    os << ',' << p.kinetic << ',' << p.potential << '\n';
  }
}

}  // namespace eer
