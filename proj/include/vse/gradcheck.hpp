#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "vse/autograd.hpp"

namespace vse {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_coord = 0;
    std::size_t coords_checked = 0;
};

template <typename T>
using ScalarFunction = std::function<Var<T>(std::span<Var<T>>)>;

// Compares reverse-mode gradients of `loss` with respect to `params` against central
// differences, perturbing the parameter values in place (they are restored afterwards).
// Error per coordinate is |analytic - numeric| / max(1, |numeric|). `loss` must rebuild its
// graph on every call and be deterministic.
template <typename T>
GradCheckResult grad_check_params(const std::function<Var<T>()>& loss, std::span<Var<T>> params, T step) {
    const auto analytic = gradients(loss(), params);

    GradCheckResult result;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& value = params[k].mutable_value();
        for (std::size_t i = 0; i < value.size(); ++i) {
            const T saved = value[i];
            value[i] = saved + step;
            const T up = loss().value().item();
            value[i] = saved - step;
            const T down = loss().value().item();
            value[i] = saved;
            const T numeric = (up - down) / (T(2) * step);
            const double err =
                std::abs(double(analytic[k][i]) - double(numeric)) / std::max(1.0, std::abs(double(numeric)));
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_input = k;
                result.worst_coord = i;
            }
            ++result.coords_checked;
        }
    }
    return result;
}

// Same check for a function of fresh inputs initialised to `point`.
template <typename T>
GradCheckResult grad_check(const ScalarFunction<T>& f, std::vector<Tensor<T>> point, T step) {
    std::vector<Var<T>> inputs;
    inputs.reserve(point.size());
    for (auto& p : point) inputs.push_back(parameter(std::move(p)));
    const std::span<Var<T>> view(inputs);
    return grad_check_params<T>([&] { return f(view); }, view, step);
}

}  // namespace vse
