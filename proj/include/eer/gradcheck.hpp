#pragma once

#include <functional>

#include "eer/tensor.hpp"

namespace eer {

inline constexpr double kGradCheckStep = 1e-5;

/// Central-difference gradient (f(x + h·e) − f(x − h·e)) / 2h per coordinate.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                            double h = kGradCheckStep);

/// |a − b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-8);

/// Largest elementwise relative_error between two same-shaped tensors.
double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-8);

}  // namespace eer
