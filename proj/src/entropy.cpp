#include "eer/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "eer/error.hpp"
#include "eer/rng.hpp"

namespace eer {

namespace {

void require_q_range(double q, const char* op) {
  if (!(q > 1.0 && q <= 2.0)) {
    throw std::invalid_argument(std::string(op) + ": q must lie in (1, 2], got " +
                                std::to_string(q));
  }
}

double power_sum(std::span<const double> p, double q) {
  double s = 0.0;
  for (double v : p) s += std::pow(v, q);
  return s;
}

ContractionCertificate finish(const ModelWeights& weights, double attn_term, int k) {
  if (k < 1) throw std::invalid_argument("contraction_certificate: k must be >= 1");
  const NormEstimate wq = operator_norm(weights.w_q);
  const NormEstimate wk = operator_norm(weights.w_k);
  ContractionCertificate c;
  c.wq_norm = wq.value;
  c.wk_norm = wk.value;
  c.norms_converged = wq.converged && wk.converged;
  c.wv_fro = frobenius_norm(weights.w_v);
  c.attn_term = attn_term;
  c.per_step_bound =
      (4.0 * kSoftmaxLipschitz * c.wq_norm * c.wk_norm + c.attn_term) * c.wv_fro;
  c.k = k;
  c.k_power_bound = std::pow(c.per_step_bound, k);
  c.contractive = c.k_power_bound < 1.0;
  return c;
}

}  // namespace

void validate_probability_row(std::span<const double> p) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("probability row has a negative or non-finite entry");
    }
    s += v;
  }
  if (std::abs(s - 1.0) > kSimplexTolerance) {
    throw std::invalid_argument("probability row sums to " + std::to_string(s));
  }
}

void validate_row_stochastic(const Tensor& s) {
  for (std::size_t r = 0; r < s.rows(); ++r) {
    try {
      validate_probability_row(s.row(r));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("row " + std::to_string(r) + ": " + e.what());
    }
  }
}

double tsallis_entropy(std::span<const double> p, double q) {
  if (q == 1.0) throw std::invalid_argument("tsallis_entropy: q = 1, use shannon_entropy");
  validate_probability_row(p);
  return (1.0 - power_sum(p, q)) / (q - 1.0);
}

double shannon_entropy(std::span<const double> p) {
  validate_probability_row(p);
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double uniform_tsallis_entropy(std::size_t n, double q) {
  if (n == 0) throw std::invalid_argument("uniform_tsallis_entropy: n = 0");
  if (q == 1.0) return std::log(static_cast<double>(n));
  return (1.0 - std::pow(static_cast<double>(n), 1.0 - q)) / (q - 1.0);
}

double mean_row_tsallis(const Tensor& s, double q) {
  if (s.rows() == 0) throw std::invalid_argument("mean_row_tsallis: empty map");
  double total = 0.0;
  for (std::size_t r = 0; r < s.rows(); ++r) total += tsallis_entropy(s.row(r), q);
  return total / static_cast<double>(s.rows());
}

RowBound lemma_row_bound(std::span<const double> p, double q) {
  require_q_range(q, "lemma_row_bound");
  validate_probability_row(p);
  double l2 = 0.0;
  for (double v : p) l2 += v * v;
  // (1 − (q − 1)S_q) is Σ p^q by definition; use it directly to avoid cancellation.
  return {l2, std::pow(power_sum(p, q), 2.0 / q)};
}

FrobeniusBound attention_frobenius_bound(const Tensor& s, double q) {
  require_q_range(q, "attention_frobenius_bound");
  validate_row_stochastic(s);
  FrobeniusBound out{0.0, 0.0};
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const RowBound b = lemma_row_bound(s.row(r), q);
    out.fro_sq += b.lhs;
    out.bound += b.rhs;
  }
  return out;
}

NormEstimate operator_norm(const Tensor& w, double tol, int max_iterations) {
  if (!w.all_finite()) throw NumericalError("operator_norm: non-finite matrix");
  NormEstimate est;
  if (w.empty() || max_abs(w) == 0.0) {
    est.converged = true;
    return est;
  }
  const Tensor gram = matmul_tn(w, w);
  Rng rng(0x5eed);
  Tensor v(gram.rows(), 1);
  for (double& x : v.data()) x = rng.uniform(0.5, 1.5);
  v *= 1.0 / frobenius_norm(v);
  double lambda = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    Tensor next = matmul(gram, v);
    const double rayleigh = dot(v, next);
    const double n = frobenius_norm(next);
    est.iterations = it;
    if (n == 0.0) {  // start vector orthogonal to the range; restart along a basis axis
      v = Tensor(gram.rows(), 1);
      v[static_cast<std::size_t>(it) % v.size()] = 1.0;
      continue;
    }
    next *= 1.0 / n;
    v = std::move(next);
    if (it > 1 && std::abs(rayleigh - lambda) <= tol * std::abs(rayleigh)) {
      lambda = rayleigh;
      est.converged = true;
      break;
    }
    lambda = rayleigh;
  }
  est.value = std::sqrt(std::max(lambda, 0.0));
  return est;
}

ContractionCertificate contraction_certificate(const ModelWeights& weights, const Tensor& s,
                                               double q, int k) {
  const FrobeniusBound fb = attention_frobenius_bound(s, q);
  return finish(weights, std::sqrt(fb.bound), k);
}

ContractionCertificate worst_case_certificate(const ModelWeights& weights, std::size_t n,
                                              int k) {
  return finish(weights, std::sqrt(static_cast<double>(n)), k);
}

TrajectoryCertificate certify_trajectory(const ModelWeights& weights,
                                         std::span<const Tensor> maps, double q) {
  if (maps.empty()) throw std::invalid_argument("certify_trajectory: no attention maps");
  TrajectoryCertificate out;
  out.product_bound = 1.0;
  for (const Tensor& s : maps) {
    out.per_iteration.push_back(contraction_certificate(weights, s, q, 1));
    out.product_bound *= out.per_iteration.back().per_step_bound;
  }
  out.contractive = out.product_bound < 1.0;
  return out;
}

std::string format_report(const ContractionCertificate& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "wq_norm=" << c.wq_norm << '\n'
     << "wk_norm=" << c.wk_norm << '\n'
     << "wv_fro=" << c.wv_fro << '\n'
     << "attn_term=" << c.attn_term << '\n'
     << "softmax_lipschitz=" << c.softmax_lipschitz << '\n'
     << "per_step_bound=" << c.per_step_bound << '\n'
     << "k=" << c.k << '\n'
     << "k_power_bound=" << c.k_power_bound << '\n'
     << "norms_converged=" << (c.norms_converged ? "true" : "false") << '\n'
     << "contractive=" << (c.contractive ? "true" : "false") << '\n';
  return os.str();
}

std::string format_report(const TrajectoryCertificate& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t t = 0; t < c.per_iteration.size(); ++t) {
    const auto& it = c.per_iteration[t];
    os << "iter." << t + 1 << ".attn_term=" << it.attn_term << '\n'
       << "iter." << t + 1 << ".per_step_bound=" << it.per_step_bound << '\n';
  }
  os << "iterations=" << c.per_iteration.size() << '\n'
     << "product_bound=" << c.product_bound << '\n'
     << "trajectory_contractive=" << (c.contractive ? "true" : "false") << '\n';
  return os.str();
}

void GateParams::validate() const {
  if (!(alpha_min > 0.0 && alpha_min <= 1.0)) {
    throw std::invalid_argument("GateParams: alpha_min must lie in (0, 1]");
  }
  if (!(saturation_entropy > 0.0)) {
    throw std::invalid_argument("GateParams: saturation_entropy must be positive");
  }
}

double entropy_gate(double s_q, const GateParams& params) {
  params.validate();
  const double ramp = std::clamp(s_q / params.saturation_entropy, 0.0, 1.0);
  return params.alpha_min + (1.0 - params.alpha_min) * ramp;
}

double entropy_gate_slope(double s_q, const GateParams& params) {
  if (s_q < 0.0 || s_q >= params.saturation_entropy) return 0.0;
  return (1.0 - params.alpha_min) / params.saturation_entropy;
}

}  // namespace eer
