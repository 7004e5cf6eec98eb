#include <doctest.h>

#include <cmath>

#include "eer/entropy.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace eer;

namespace {

ModelWeights attention_only(double wv_fro, double wq_scale = 0.0) {
  ModelWeights w = ModelWeights::zeros({8, 32, 4});
  w.w_v = Tensor::identity(8) * (wv_fro / std::sqrt(8.0));
  w.w_q = Tensor::identity(8) * wq_scale;
  w.w_k = Tensor::identity(8) * wq_scale;
  return w;
}

std::vector<double> row_of(const Tensor& s, std::size_t r) {
  return {s.row(r).begin(), s.row(r).end()};
}

}  // namespace

TEST_CASE("tsallis entropy") {
  const std::vector<double> hot{0, 1, 0, 0};
  CHECK(tsallis_entropy(hot, 1.5) == 0.0);
  CHECK(tsallis_entropy(std::vector<double>{0.5, 0.5}, 2.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(tsallis_entropy(std::vector<double>(4, 0.25), 1.5) - 1.0) < 1e-12);
  CHECK(std::abs(oracle::tsallis(std::vector<double>(4, 0.25), 1.5) - 1.0) < 1e-15);
  CHECK(uniform_tsallis_entropy(4, 1.5) == doctest::Approx(1.0));
  CHECK_THROWS_AS(tsallis_entropy(hot, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(tsallis_entropy(std::vector<double>{0.5, 0.6}, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(tsallis_entropy(std::vector<double>{1.5, -0.5}, 1.5), std::invalid_argument);

  Rng rng(21);
  for (double q : {1.1, 1.5, 2.0}) {
    for (int i = 0; i < 200; ++i) {
      const auto p = fixtures::random_simplex(rng, 1 + rng.uniform_int(12));
      const double s = tsallis_entropy(p, q);
      CHECK(s >= 0.0);
      CHECK(std::abs(s - oracle::tsallis(p, q)) < 1e-12);
    }
  }
}

TEST_CASE("shannon entropy and the q -> 1 limit") {
  CHECK(shannon_entropy(std::vector<double>{0, 0, 1}) == 0.0);
  CHECK(shannon_entropy(std::vector<double>(5, 0.2)) == doctest::Approx(std::log(5.0)));
  Rng rng(22);
  for (int i = 0; i < 500; ++i) {
    const auto p = fixtures::random_simplex(rng, 2 + rng.uniform_int(30));
    CHECK(std::abs(shannon_entropy(p) - oracle::shannon(p)) < 1e-12);
    CHECK(std::abs(tsallis_entropy(p, 1.001) - shannon_entropy(p)) < 1e-2);
  }
}

TEST_CASE("row-norm lemma") {
  SUBCASE("one-hot is tight for every q") {
    for (double q : {1.1, 1.5, 2.0}) {
      const RowBound b = lemma_row_bound(std::vector<double>{0, 0, 1}, q);
      CHECK(b.lhs == 1.0);
      CHECK(b.rhs == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
  SUBCASE("q = 2 collapses to equality") {
    Rng rng(23);
    for (int i = 0; i < 100; ++i) {
      const auto p = fixtures::random_simplex(rng, 6);
      const RowBound b = lemma_row_bound(p, 2.0);
      CHECK(std::abs(b.lhs - b.rhs) < 1e-15);
    }
  }
  SUBCASE("range of q") {
    const std::vector<double> p{0.5, 0.5};
    CHECK_THROWS_AS(lemma_row_bound(p, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(lemma_row_bound(p, 2.5), std::invalid_argument);
  }
  SUBCASE("rhs agrees with the entropy form") {
    Rng rng(24);
    const auto p = fixtures::random_simplex(rng, 9);
    for (double q : {1.2, 1.7}) {
      const double entropy_form = std::pow(1.0 - (q - 1.0) * oracle::tsallis(p, q), 2.0 / q);
      CHECK(std::abs(lemma_row_bound(p, q).rhs - entropy_form) < 1e-12);
    }
  }
}

TEST_CASE("frobenius corollary") {
  const Tensor id = Tensor::identity(4);
  for (double q : {1.1, 1.5, 2.0}) {
    const FrobeniusBound b = attention_frobenius_bound(id, q);
    CHECK(b.fro_sq == 4.0);
    CHECK(b.bound == doctest::Approx(4.0));
  }
  const FrobeniusBound u = attention_frobenius_bound(Tensor(4, 4, 0.25), 2.0);
  CHECK(u.fro_sq == doctest::Approx(1.0));
  CHECK(u.bound == doctest::Approx(1.0));
  CHECK_THROWS_AS(attention_frobenius_bound(Tensor(2, 2, 0.7), 1.5), std::invalid_argument);

  Rng rng(25);
  for (int i = 0; i < 200; ++i) {
    const Tensor s = fixtures::random_stochastic(rng, 8, 8, 1.0 + 3.0 * rng.uniform());
    const FrobeniusBound b = attention_frobenius_bound(s, 1.5);
    CHECK(b.fro_sq <= b.bound + 1e-10);
  }
}

TEST_CASE("operator norm") {
  CHECK(operator_norm(Tensor::identity(8)).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(operator_norm(Tensor::diagonal(std::vector<double>{3, 1, 0.5})).value ==
        doctest::Approx(3.0).epsilon(1e-12));
  CHECK(operator_norm(Tensor(3, 3)).value == 0.0);

  Rng rng(26);
  for (int i = 0; i < 20; ++i) {
    const Tensor w = fixtures::random_tensor(rng, 8, 8);
    const NormEstimate est = operator_norm(w);
    CHECK(est.converged);
    CHECK(std::abs(est.value - oracle::singular_values(w).front()) < 1e-8);
  }
  const Tensor rect = fixtures::random_tensor(rng, 5, 9);
  CHECK(std::abs(operator_norm(rect).value - oracle::singular_values(rect).front()) < 1e-8);

  SUBCASE("iteration cap is reported") {
    const NormEstimate capped = operator_norm(fixtures::random_tensor(rng, 8, 8), 1e-300, 3);
    CHECK_FALSE(capped.converged);
    CHECK(capped.iterations == 3);
    CHECK(capped.value > 0.0);
  }
}

TEST_CASE("contraction certificate") {
  SUBCASE("uniform attention, small values") {
    const ContractionCertificate c = contraction_certificate(attention_only(0.4), Tensor(4, 4, 0.25), 1.5, 1);
    const double attn = std::sqrt(4.0 * std::pow(0.5, 4.0 / 3.0));
    CHECK(c.attn_term == doctest::Approx(attn).epsilon(1e-12));
    CHECK(c.attn_term == doctest::Approx(1.260).epsilon(1e-3));
    CHECK(c.per_step_bound == doctest::Approx(0.4 * attn).epsilon(1e-12));
    CHECK(c.per_step_bound == doctest::Approx(0.504).epsilon(1e-3));
    CHECK(c.contractive);
  }
  SUBCASE("zero values") {
    for (int k : {1, 5, 100}) {
      const ContractionCertificate c = contraction_certificate(attention_only(0.0), Tensor::identity(4), 1.5, k);
      CHECK(c.per_step_bound == 0.0);
      CHECK(c.contractive);
    }
  }
  SUBCASE("one-hot attention") {
    const ContractionCertificate c = contraction_certificate(attention_only(0.6), Tensor::identity(4), 1.5, 1);
    CHECK(c.attn_term == doctest::Approx(2.0));
    CHECK(c.per_step_bound == doctest::Approx(1.2));
    CHECK_FALSE(c.contractive);
  }
  SUBCASE("recomputation invariants") {
    Rng rng(27);
    ModelWeights w = ModelWeights::initialize({8, 32, 4}, rng);
    const Tensor s = fixtures::random_stochastic(rng, 10, 10, 2.0);
    const ContractionCertificate c = contraction_certificate(w, s, 1.5, 7);
    CHECK(std::abs(c.per_step_bound - (2.0 * c.wq_norm * c.wk_norm + c.attn_term) * c.wv_fro) < 1e-12);
    CHECK(c.k_power_bound == doctest::Approx(std::pow(c.per_step_bound, 7)).epsilon(1e-12));
    CHECK(c.contractive == (c.k_power_bound < 1.0));
    CHECK(c.softmax_lipschitz == 0.5);
    CHECK(c.wv_fro == doctest::Approx(frobenius_norm(w.w_v)));
  }
  SUBCASE("sharper maps never shrink the attention term below the uniform one") {
    Rng rng(28);
    const ModelWeights w = attention_only(0.5);
    const double uniform = contraction_certificate(w, Tensor(6, 6, 1.0 / 6), 1.5, 1).attn_term;
    const double worst = worst_case_certificate(w, 6, 1).attn_term;
    CHECK(worst == doctest::Approx(std::sqrt(6.0)));
    for (int i = 0; i < 50; ++i) {
      const double a = contraction_certificate(w, fixtures::random_stochastic(rng, 6, 6, 3.0), 1.5, 1).attn_term;
      CHECK(a >= uniform - 1e-12);
      CHECK(a <= worst + 1e-12);
    }
  }
  SUBCASE("trajectory product") {
    const ModelWeights w = attention_only(0.4);
    const std::vector<Tensor> maps{Tensor(4, 4, 0.25), Tensor::identity(4)};
    const TrajectoryCertificate t = certify_trajectory(w, maps, 1.5);
    REQUIRE(t.per_iteration.size() == 2);
    CHECK(t.product_bound == doctest::Approx(t.per_iteration[0].per_step_bound * t.per_iteration[1].per_step_bound));
    CHECK(t.contractive == (t.product_bound < 1.0));
  }
  SUBCASE("report lists every field") {
    const std::string r = format_report(contraction_certificate(attention_only(0.4), Tensor(4, 4, 0.25), 1.5, 2));
    for (const char* key : {"wq_norm=", "wk_norm=", "wv_fro=", "attn_term=", "per_step_bound=", "k=2",
                            "k_power_bound=", "contractive=true", "softmax_lipschitz=0.5"}) {
      CHECK(r.find(key) != std::string::npos);
    }
  }
  SUBCASE("invalid inputs") {
    CHECK_THROWS_AS(contraction_certificate(attention_only(0.4), Tensor(2, 2, 0.7), 1.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(contraction_certificate(attention_only(0.4), Tensor(2, 2, 0.5), 1.5, 0), std::invalid_argument);
    CHECK_THROWS_AS(contraction_certificate(attention_only(0.4), Tensor(2, 2, 0.5), 2.5, 1), std::invalid_argument);
  }
}

TEST_CASE("entropy gate") {
  const GateParams p{0.2, 1.0};
  CHECK(entropy_gate(0.0, p) == doctest::Approx(0.2));
  CHECK(entropy_gate(0.5, p) == doctest::Approx(0.6));
  CHECK(entropy_gate(1.0, p) == doctest::Approx(1.0));
  CHECK(entropy_gate(7.0, p) == doctest::Approx(1.0));
  CHECK_THROWS_AS(entropy_gate(0.5, GateParams{0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(entropy_gate(0.5, GateParams{0.5, 0.0}), std::invalid_argument);

  double last = 0.0;
  for (double s = 0.0; s < 2.0; s += 0.01) {
    const double a = entropy_gate(s, p);
    CHECK(a >= 0.2);
    CHECK(a <= 1.0);
    CHECK(a >= last);
    last = a;
  }
  CHECK(entropy_gate_slope(0.5, p) == doctest::Approx(0.8));
  CHECK(entropy_gate_slope(1.5, p) == 0.0);
}
