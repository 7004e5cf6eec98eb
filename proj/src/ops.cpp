#include "eer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "eer/error.hpp"

namespace eer {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap rows_view(const Tensor& t, std::size_t first, std::size_t count) {
  return ConstMap(t.data().data() + first * t.cols(), static_cast<Eigen::Index>(count),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap rows_view(Tensor& t, std::size_t first, std::size_t count) {
  return MutMap(t.data().data() + first * t.cols(), static_cast<Eigen::Index>(count),
                static_cast<Eigen::Index>(t.cols()));
}

void require_scalar(const Var& v, const char* op) {
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError(std::string(op) + ": expected 1x1, got " + shape_string(v.value()));
  }
}

void require_blocks(const Tensor& t, std::size_t block, const char* op) {
  if (block == 0 || t.rows() % block != 0) {
    throw ShapeError(std::string(op) + ": " + std::to_string(t.rows()) +
                     " rows are not a multiple of block " + std::to_string(block));
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return make_result(a.value() + b.value(), {a, b},
                     [](const Tensor& g, std::span<Tensor* const> gi) {
                       if (gi[0]) *gi[0] += g;
                       if (gi[1]) *gi[1] += g;
                     });
}

Var sub(const Var& a, const Var& b) {
  return make_result(a.value() - b.value(), {a, b},
                     [](const Tensor& g, std::span<Tensor* const> gi) {
                       if (gi[0]) *gi[0] += g;
                       if (gi[1]) *gi[1] -= g;
                     });
}

Var scale(const Var& a, double s) {
  return make_result(a.value() * s, {a}, [s](const Tensor& g, std::span<Tensor* const> gi) {
    if (gi[0]) gi[0]->add_scaled(g, s);
  });
}

Var mul(const Var& a, const Var& s) {
  require_scalar(s, "mul");
  return make_result(a.value() * s.scalar(), {a, s},
                     [a, s](const Tensor& g, std::span<Tensor* const> gi) {
                       if (gi[0]) gi[0]->add_scaled(g, s.scalar());
                       if (gi[1]) (*gi[1])[0] += dot(g, a.value());
                     });
}

Var matmul(const Var& a, const Var& b) {
  return make_result(matmul(a.value(), b.value()), {a, b},
                     [a, b](const Tensor& g, std::span<Tensor* const> gi) {
                       if (gi[0]) *gi[0] += matmul_nt(g, b.value());
                       if (gi[1]) *gi[1] += matmul_tn(a.value(), g);
                     });
}

Var matmul_nt(const Var& a, const Var& b) {
  return make_result(matmul_nt(a.value(), b.value()), {a, b},
                     [a, b](const Tensor& g, std::span<Tensor* const> gi) {
                       if (gi[0]) *gi[0] += matmul(g, b.value());
                       if (gi[1]) *gi[1] += matmul_tn(g, a.value());
                     });
}

Var add_row_bias(const Var& a, const Var& bias) {
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw ShapeError("add_row_bias: bias " + shape_string(bv) + " for " + shape_string(av));
  }
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
  return make_result(std::move(out), {a, bias}, [](const Tensor& g, std::span<Tensor* const> gi) {
    if (gi[0]) *gi[0] += g;
    if (gi[1]) {
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) (*gi[1])[c] += g(r, c);
    }
  });
}

Var gather_rows(const Var& table, std::span<const int> indices) {
  const Tensor& tv = table.value();
  Tensor out(indices.size(), tv.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || static_cast<std::size_t>(indices[i]) >= tv.rows()) {
      throw std::out_of_range("gather_rows: index " + std::to_string(indices[i]) +
                              " outside table " + shape_string(tv));
    }
    std::copy_n(tv.row(static_cast<std::size_t>(indices[i])).begin(), tv.cols(),
                out.row(i).begin());
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return make_result(std::move(out), {table},
                     [idx = std::move(idx)](const Tensor& g, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         auto dst = gi[0]->row(static_cast<std::size_t>(idx[i]));
                         auto src = g.row(i);
                         for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                       }
                     });
}

Var block_matmul_nt(const Var& a, const Var& b, std::size_t block) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "block_matmul_nt");
  require_blocks(av, block, "block_matmul_nt");
  Tensor out(av.rows(), block);
  for (std::size_t r0 = 0; r0 < av.rows(); r0 += block) {
    rows_view(out, r0, block).noalias() =
        rows_view(av, r0, block) * rows_view(bv, r0, block).transpose();
  }
  return make_result(std::move(out), {a, b},
                     [a, b, block](const Tensor& g, std::span<Tensor* const> gi) {
                       const Tensor& av = a.value();
                       const Tensor& bv = b.value();
                       for (std::size_t r0 = 0; r0 < av.rows(); r0 += block) {
                         if (gi[0])
                           rows_view(*gi[0], r0, block).noalias() +=
                               rows_view(g, r0, block) * rows_view(bv, r0, block);
                         if (gi[1])
                           rows_view(*gi[1], r0, block).noalias() +=
                               rows_view(g, r0, block).transpose() * rows_view(av, r0, block);
                       }
                     });
}

Var block_matmul(const Var& s, const Var& v, std::size_t block) {
  const Tensor& sv = s.value();
  const Tensor& vv = v.value();
  if (sv.cols() != block || sv.rows() != vv.rows()) {
    throw ShapeError("block_matmul: incompatible shapes " + shape_string(sv) + " and " +
                     shape_string(vv));
  }
  require_blocks(sv, block, "block_matmul");
  Tensor out(sv.rows(), vv.cols());
  for (std::size_t r0 = 0; r0 < sv.rows(); r0 += block) {
    rows_view(out, r0, block).noalias() = rows_view(sv, r0, block) * rows_view(vv, r0, block);
  }
  return make_result(std::move(out), {s, v},
                     [s, v, block](const Tensor& g, std::span<Tensor* const> gi) {
                       const Tensor& sv = s.value();
                       const Tensor& vv = v.value();
                       for (std::size_t r0 = 0; r0 < sv.rows(); r0 += block) {
                         if (gi[0])
                           rows_view(*gi[0], r0, block).noalias() +=
                               rows_view(g, r0, block) * rows_view(vv, r0, block).transpose();
                         if (gi[1])
                           rows_view(*gi[1], r0, block).noalias() +=
                               rows_view(sv, r0, block).transpose() * rows_view(g, r0, block);
                       }
                     });
}

Var row_softmax(const Var& logits, double temperature) {
  auto p = std::make_shared<const Tensor>(row_softmax(logits.value(), temperature));
  return make_result(p, {logits}, [p, temperature](const Tensor& g, std::span<Tensor* const> gi) {
    if (!gi[0]) return;
    const double inv_tau = 1.0 / temperature;
    for (std::size_t r = 0; r < p->rows(); ++r) {
      auto pr = p->row(r);
      auto gr = g.row(r);
      double inner = 0.0;
      for (std::size_t c = 0; c < pr.size(); ++c) inner += gr[c] * pr[c];
      auto dst = gi[0]->row(r);
      for (std::size_t c = 0; c < pr.size(); ++c) dst[c] += inv_tau * pr[c] * (gr[c] - inner);
    }
  });
}

Var gelu(const Var& a) {
  constexpr double kC = 0.7978845608028654;  // √(2/π)
  constexpr double kA = 0.044715;
  const Tensor& in = a.value();
  Tensor out(in.rows(), in.cols());
  auto slope = std::make_shared<Tensor>(in.rows(), in.cols());
  const auto x = Eigen::Map<const Eigen::ArrayXd>(in.data().data(), in.size());
  // tanh through the vectorized exp; saturates cleanly at ±1.
  const Eigen::ArrayXd t = 1.0 - 2.0 / (1.0 + (2.0 * kC * (x + kA * x.cube())).exp());
  Eigen::Map<Eigen::ArrayXd>(out.data().data(), out.size()) = 0.5 * x * (1.0 + t);
  Eigen::Map<Eigen::ArrayXd>(slope->data().data(), slope->size()) =
      0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) * kC * (1.0 + 3.0 * kA * x.square());
  return make_result(std::move(out), {a}, [slope](const Tensor& g, std::span<Tensor* const> gi) {
    if (!gi[0]) return;
    for (std::size_t i = 0; i < slope->size(); ++i) (*gi[0])[i] += g[i] * (*slope)[i];
  });
}

Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps) {
  const Tensor& x = a.value();
  const std::size_t n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(n));
  }
  auto xhat = std::make_shared<Tensor>(x.rows(), n);
  auto inv_std = std::make_shared<std::vector<double>>(x.rows());
  Tensor out(x.rows(), n);
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    double mu = 0.0;
    for (double v : xr) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : xr) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      (*xhat)(r, c) = (xr[c] - mu) * is;
      out(r, c) = gv[c] * (*xhat)(r, c) + bv[c];
    }
  }
  return make_result(
      std::move(out), {a, gain, bias},
      [gain, xhat, inv_std](const Tensor& g, std::span<Tensor* const> gi) {
        const Tensor& xh = *xhat;
        const std::size_t n = xh.cols();
        const Tensor& gv = gain.value();
        std::vector<double> dxhat(n);
        for (std::size_t r = 0; r < xh.rows(); ++r) {
          auto gr = g.row(r);
          auto xr = xh.row(r);
          if (gi[1])
            for (std::size_t c = 0; c < n; ++c) (*gi[1])[c] += gr[c] * xr[c];
          if (gi[2])
            for (std::size_t c = 0; c < n; ++c) (*gi[2])[c] += gr[c];
          if (!gi[0]) continue;
          double m1 = 0.0;
          double m2 = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            dxhat[c] = gr[c] * gv[c];
            m1 += dxhat[c];
            m2 += dxhat[c] * xr[c];
          }
          m1 /= static_cast<double>(n);
          m2 /= static_cast<double>(n);
          auto dst = gi[0]->row(r);
          for (std::size_t c = 0; c < n; ++c)
            dst[c] += (*inv_std)[r] * (dxhat[c] - m1 - xr[c] * m2);
        }
      });
}

Var sum(const Var& a) {
  return make_result(Tensor(1, 1, sum(a.value())), {a},
                     [](const Tensor& g, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       for (double& v : gi[0]->data()) v += g[0];
                     });
}

Var mean(const Var& a) {
  if (a.value().empty()) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var row_norm_sum(const Var& a) {
  const Tensor& x = a.value();
  auto norms = std::make_shared<std::vector<double>>(x.rows());
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v * v;
    (*norms)[r] = std::sqrt(s);
    total += (*norms)[r];
  }
  return make_result(Tensor(1, 1, total), {a},
                     [a, norms](const Tensor& g, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       const Tensor& x = a.value();
                       for (std::size_t r = 0; r < x.rows(); ++r) {
                         if ((*norms)[r] == 0.0) continue;
                         const double k = g[0] / (*norms)[r];
                         auto dst = gi[0]->row(r);
                         auto src = x.row(r);
                         for (std::size_t c = 0; c < src.size(); ++c) dst[c] += k * src[c];
                       }
                     });
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  const Tensor& z = logits.value();
  if (targets.size() != z.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     shape_string(z));
  }
  std::size_t valid = 0;
  double total = 0.0;
  auto probs = std::make_shared<Tensor>(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (targets[r] == kNoTarget) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= z.cols()) {
      throw std::out_of_range("cross_entropy: target " + std::to_string(targets[r]) +
                              " outside vocabulary");
    }
    ++valid;
    auto zr = z.row(r);
    const double mx = *std::max_element(zr.begin(), zr.end());
    double s = 0.0;
    for (double v : zr) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    total += lse - zr[static_cast<std::size_t>(targets[r])];
    auto pr = probs->row(r);
    for (std::size_t c = 0; c < zr.size(); ++c) pr[c] = std::exp(zr[c] - lse);
  }
  if (valid == 0) throw std::invalid_argument("cross_entropy: no target positions");
  std::vector<int> tgt(targets.begin(), targets.end());
  const double inv = 1.0 / static_cast<double>(valid);
  return make_result(Tensor(1, 1, total * inv), {logits},
                     [probs, tgt = std::move(tgt), inv](const Tensor& g,
                                                        std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       for (std::size_t r = 0; r < tgt.size(); ++r) {
                         if (tgt[r] == kNoTarget) continue;
                         auto dst = gi[0]->row(r);
                         auto pr = probs->row(r);
                         for (std::size_t c = 0; c < pr.size(); ++c) dst[c] += g[0] * inv * pr[c];
                         dst[static_cast<std::size_t>(tgt[r])] -= g[0] * inv;
                       }
                     });
}

Var mean_neg_log_row_max(const Var& probs) {
  const Tensor& p = probs.value();
  if (p.rows() == 0 || p.cols() == 0) throw ShapeError("mean_neg_log_row_max: empty map");
  auto argmax = std::make_shared<std::vector<std::size_t>>(p.rows());
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    auto pr = p.row(r);
    const auto it = std::max_element(pr.begin(), pr.end());
    (*argmax)[r] = static_cast<std::size_t>(it - pr.begin());
    total -= std::log(*it);
  }
  const double inv = 1.0 / static_cast<double>(p.rows());
  return make_result(Tensor(1, 1, total * inv), {probs},
                     [probs, argmax, inv](const Tensor& g, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       const Tensor& p = probs.value();
                       for (std::size_t r = 0; r < p.rows(); ++r) {
                         const std::size_t c = (*argmax)[r];
                         (*gi[0])(r, c) -= g[0] * inv / p(r, c);
                       }
                     });
}

Var tsallis_row_mean(const Var& probs, double q) {
  if (q == 1.0) throw std::invalid_argument("tsallis_row_mean: q must differ from 1");
  const Tensor& p = probs.value();
  if (p.rows() == 0) throw ShapeError("tsallis_row_mean: empty map");
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0.0;
    for (double v : p.row(r)) s += std::pow(v, q);
    total += (1.0 - s) / (q - 1.0);
  }
  const double inv = 1.0 / static_cast<double>(p.rows());
  return make_result(Tensor(1, 1, total * inv), {probs},
                     [probs, q, inv](const Tensor& g, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       const Tensor& p = probs.value();
                       const double k = -g[0] * inv * q / (q - 1.0);
                       for (std::size_t i = 0; i < p.size(); ++i)
                         (*gi[0])[i] += k * std::pow(p[i], q - 1.0);
                     });
}

Var row_tsallis(const Var& probs, double q) {
  if (q == 1.0) throw std::invalid_argument("row_tsallis: q must differ from 1");
  const Tensor& p = probs.value();
  Tensor out(p.rows(), 1);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0.0;
    for (double v : p.row(r)) s += std::pow(v, q);
    out[r] = (1.0 - s) / (q - 1.0);
  }
  return make_result(std::move(out), {probs}, [probs, q](const Tensor& g, std::span<Tensor* const> gi) {
    if (!gi[0]) return;
    const Tensor& p = probs.value();
    for (std::size_t r = 0; r < p.rows(); ++r) {
      const double k = -g[r] * q / (q - 1.0);
      auto pr = p.row(r);
      auto dst = gi[0]->row(r);
      for (std::size_t c = 0; c < pr.size(); ++c) dst[c] += k * std::pow(pr[c], q - 1.0);
    }
  });
}

Var block_row_mean(const Var& column, std::size_t block) {
  const Tensor& x = column.value();
  if (x.cols() != 1) throw ShapeError("block_row_mean: expected a column, got " + shape_string(x));
  require_blocks(x, block, "block_row_mean");
  const std::size_t groups = x.rows() / block;
  Tensor out(groups, 1);
  for (std::size_t g = 0; g < groups; ++g) {
    double s = 0.0;
    for (std::size_t r = 0; r < block; ++r) s += x[g * block + r];
    out[g] = s / static_cast<double>(block);
  }
  return make_result(std::move(out), {column}, [block](const Tensor& g, std::span<Tensor* const> gi) {
    if (!gi[0]) return;
    const double inv = 1.0 / static_cast<double>(block);
    for (std::size_t r = 0; r < gi[0]->rows(); ++r) (*gi[0])[r] += g[r / block] * inv;
  });
}

Var scale_row_blocks(const Var& a, const Var& factors, std::size_t block) {
  const Tensor& av = a.value();
  const Tensor& fv = factors.value();
  require_blocks(av, block, "scale_row_blocks");
  if (fv.cols() != 1 || fv.rows() * block != av.rows()) {
    throw ShapeError("scale_row_blocks: factors " + shape_string(fv) + " for " + shape_string(av));
  }
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (double& v : out.row(r)) v *= fv[r / block];
  return make_result(std::move(out), {a, factors},
                     [a, factors, block](const Tensor& g, std::span<Tensor* const> gi) {
                       const Tensor& av = a.value();
                       const Tensor& fv = factors.value();
                       for (std::size_t r = 0; r < av.rows(); ++r) {
                         auto gr = g.row(r);
                         if (gi[0]) {
                           auto dst = gi[0]->row(r);
                           for (std::size_t c = 0; c < gr.size(); ++c) dst[c] += gr[c] * fv[r / block];
                         }
                         if (gi[1]) {
                           auto ar = av.row(r);
                           double s = 0.0;
                           for (std::size_t c = 0; c < gr.size(); ++c) s += gr[c] * ar[c];
                           (*gi[1])[r / block] += s;
                         }
                       }
                     });
}

Var abs_deviation(const Var& x, double target) {
  require_scalar(x, "abs_deviation");
  const double diff = x.scalar() - target;
  const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  return make_result(Tensor(1, 1, std::abs(diff)), {x},
                     [sign](const Tensor& g, std::span<Tensor* const> gi) {
                       if (gi[0]) (*gi[0])[0] += sign * g[0];
                     });
}

Var scalar_map(const Var& x, const std::function<double(double)>& f,
               const std::function<double(double)>& df) {
  Tensor out = x.value();
  for (double& v : out.data()) v = f(v);
  return make_result(std::move(out), {x}, [x, df](const Tensor& g, std::span<Tensor* const> gi) {
    if (!gi[0]) return;
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < xv.size(); ++i) (*gi[0])[i] += g[i] * df(xv[i]);
  });
}

}  // namespace eer
