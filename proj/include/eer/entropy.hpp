#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eer/tensor.hpp"
#include "eer/weights.hpp"

namespace eer {

/// Sup-norm of the softmax Jacobian used by the weight term of the bound.
inline constexpr double kSoftmaxLipschitz = 0.5;
inline constexpr double kSimplexTolerance = 1e-9;

/// Throws std::invalid_argument unless p ≥ 0 and Σp = 1 within 1e-9.
void validate_probability_row(std::span<const double> p);
/// Throws std::invalid_argument unless every row is a probability row.
void validate_row_stochastic(const Tensor& s);

/// S_q(p) = (1 − Σ p_i^q)/(q − 1), Boltzmann constant taken as 1.
double tsallis_entropy(std::span<const double> p, double q);
/// −Σ p ln p with 0·ln 0 = 0.
double shannon_entropy(std::span<const double> p);
/// Tsallis entropy of the uniform distribution over n outcomes.
double uniform_tsallis_entropy(std::size_t n, double q);
/// Mean Tsallis entropy over the rows of a row-stochastic map.
double mean_row_tsallis(const Tensor& s, double q);

struct RowBound {
  double lhs;  // ‖p‖₂²
  double rhs;  // (1 − (q − 1)S_q(p))^{2/q} = (Σ p^q)^{2/q}
};

/// ‖p‖₂² ≤ (1 − (q − 1)S_q(p))^{2/q} for q in (1, 2].
RowBound lemma_row_bound(std::span<const double> p, double q);

struct FrobeniusBound {
  double fro_sq;  // Σ_i ‖r_i‖₂²
  double bound;   // Σ_i (1 − (q − 1)S_q(r_i))^{2/q}
};

FrobeniusBound attention_frobenius_bound(const Tensor& s, double q);

struct NormEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

inline constexpr double kOperatorNormTolerance = 1e-10;
inline constexpr int kOperatorNormMaxIterations = 1000;

/// Largest singular value by power iteration on wᵀw from a fixed seeded
/// start. Stops when the Rayleigh quotient changes by less than `tol`
/// relatively; `converged` is false if the cap was hit first.
NormEstimate operator_norm(const Tensor& w, double tol = kOperatorNormTolerance,
                           int max_iterations = kOperatorNormMaxIterations);

struct ContractionCertificate {
  double wq_norm = 0.0;
  double wk_norm = 0.0;
  double wv_fro = 0.0;
  double attn_term = 0.0;
  double per_step_bound = 0.0;
  int k = 1;
  double k_power_bound = 0.0;
  bool contractive = false;
  bool norms_converged = true;
  double softmax_lipschitz = kSoftmaxLipschitz;
};

/// Bound on the Jacobian of the attention map at one configuration:
/// (4·L_softmax·‖W_Q‖·‖W_K‖ + √Σ_i(1 − (q − 1)S_q(r_i))^{2/q})·‖W_V‖_F,
/// raised to the k-th power for the looped condition.
ContractionCertificate contraction_certificate(const ModelWeights& weights, const Tensor& s,
                                               double q, int k);
/// Same, with attn_term replaced by its one-hot upper envelope √n.
ContractionCertificate worst_case_certificate(const ModelWeights& weights, std::size_t n,
                                              int k);

/// Per-iteration certificates along a loop; the looped test multiplies the
/// per-iteration bounds instead of powering one of them.
struct TrajectoryCertificate {
  std::vector<ContractionCertificate> per_iteration;
  double product_bound = 0.0;
  bool contractive = false;
};

TrajectoryCertificate certify_trajectory(const ModelWeights& weights,
                                         std::span<const Tensor> maps, double q);

/// Flat key=value report of every certificate field.
std::string format_report(const ContractionCertificate& cert);
std::string format_report(const TrajectoryCertificate& cert);

struct GateParams {
  double alpha_min = 0.2;
  double saturation_entropy = 1.0;

  void validate() const;
};

/// α(S) = α_min + (1 − α_min)·min(1, S / S_sat). Positive, non-decreasing,
/// at most 1 and equal to 1 once S ≥ S_sat.
double entropy_gate(double s_q, const GateParams& params);
/// dα/dS (right derivative at the saturation point is 0).
double entropy_gate_slope(double s_q, const GateParams& params);

}  // namespace eer
