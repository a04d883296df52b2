#include "lcmh/activation.hpp"

#include <cmath>
#include <string>

#include "lcmh/errors.hpp"

namespace lcmh {

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Activation activation_from_tag(std::uint32_t tag) {
  if (tag > static_cast<std::uint32_t>(Activation::tanh))
    throw ConfigError("unknown activation tag " + std::to_string(tag));
  return static_cast<Activation>(tag);
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double activate(Activation a, double pre) noexcept {
  switch (a) {
    case Activation::identity: return pre;
    case Activation::relu: return pre > 0.0 ? pre : 0.0;
    case Activation::sigmoid: return sigmoid(pre);
    case Activation::tanh: return std::tanh(pre);
  }
  return pre;
}

double activation_derivative(Activation a, double pre, double post) noexcept {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return post * (1.0 - post);
    case Activation::tanh: return 1.0 - post * post;
  }
  return 1.0;
}

}  // namespace lcmh
