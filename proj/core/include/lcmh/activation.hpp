#pragma once

#include <cstdint>
#include <string_view>

namespace lcmh {

enum class Activation : std::uint32_t { identity = 0, relu = 1, sigmoid = 2, tanh = 3 };

std::string_view to_string(Activation a) noexcept;
/// Throws ConfigError for an unknown name.
Activation activation_from_string(std::string_view name);
/// Throws ConfigError for tags outside the enum.
Activation activation_from_tag(std::uint32_t tag);

/// Logistic function, stable for arbitrarily large |x|.
double sigmoid(double x) noexcept;
/// log(1 + e^x) evaluated as max(x, 0) + log1p(e^-|x|).
double softplus(double x) noexcept;

double activate(Activation a, double pre) noexcept;
/// d activate / d pre, given both the pre-activation and its image.
double activation_derivative(Activation a, double pre, double post) noexcept;

}  // namespace lcmh
