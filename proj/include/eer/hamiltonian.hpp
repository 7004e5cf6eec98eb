#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "eer/tensor.hpp"
#include "eer/weights.hpp"

namespace eer {

// Latent dynamics for the last-token induction setting. The latent z is a
// single 1×d row; tokens x are the n×d embedded sequence. Scores follow the
// row-vector convention of the looped model: s_i = (z·W_Q)·(x_i·W_K)/√d.

struct HamiltonianState {
  Tensor z;  // 1×d position
  Tensor v;  // 1×d velocity
};

struct DynamicsParams {
  double mu = 0.9;     // momentum
  double alpha = 1.0;  // field coupling
  /// β_k per step; a single entry is used for every step, otherwise the
  /// schedule must cover `steps` entries.
  std::vector<double> beta_schedule{0.1};
  double tau = 1.0;
  std::size_t steps = 100;

  double beta(std::size_t k) const;
  void validate() const;

  friend bool operator==(const DynamicsParams&, const DynamicsParams&) = default;
};

/// Softmax of s_i/τ over the n tokens (1×n).
Tensor retrieval_weights(const Tensor& z, const Tensor& x, const ModelWeights& weights,
                         double tau);
/// F_τ(z; x) = Σ_i σ_i · x_i·W_V.
Tensor soft_retrieval(const Tensor& z, const Tensor& x, const ModelWeights& weights, double tau);
/// E_τ(z; x) = −τ·log Σ_i exp(s_i/τ), evaluated with a max shift.
double attention_energy(const Tensor& z, const Tensor& x, const ModelWeights& weights, double tau);
/// ∇_z E_τ = −(1/√d)·(Σ_i σ_i x_i·W_K)·W_Qᵀ.
Tensor energy_gradient(const Tensor& z, const Tensor& x, const ModelWeights& weights, double tau);

/// V ← μV + α(F_τ(Z) − Z) − β_k∇E_τ(Z), then Z ← Z + V (new velocity).
HamiltonianState hamiltonian_step(const HamiltonianState& state, const Tensor& x,
                                  const ModelWeights& weights, const DynamicsParams& params,
                                  std::size_t k);

struct TrajectoryPoint {
  HamiltonianState state;
  double kinetic;    // ½‖V‖²
  double potential;  // E_τ(Z)
};

/// Initial point plus one entry per step (steps + 1 entries).
std::vector<TrajectoryPoint> simulate_trajectory(const Tensor& z0, const Tensor& x,
                                                 const ModelWeights& weights,
                                                 const DynamicsParams& params,
                                                 const std::optional<Tensor>& v0 = std::nullopt);

/// CSV: step, z_0..z_{d−1}, v_0..v_{d−1}, kinetic, potential.
void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryPoint>& trajectory);

}  // namespace eer
