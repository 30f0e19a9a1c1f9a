#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include "kss/error.hpp"

namespace kss {

enum class ActivationKind { kLeakyRelu, kRelu, kTanh, kSigmoid, kIdentity };

/// Pointwise nonlinearity. `slope` only matters for LeakyReLU.
struct Activation {
  ActivationKind kind = ActivationKind::kLeakyRelu;
  double slope = 0.2;

  static Activation leaky_relu(double slope = 0.2) { return {ActivationKind::kLeakyRelu, slope}; }
  static Activation relu() { return {ActivationKind::kRelu, 0.0}; }
  static Activation tanh() { return {ActivationKind::kTanh, 0.0}; }
  static Activation sigmoid() { return {ActivationKind::kSigmoid, 0.0}; }
  static Activation identity() { return {ActivationKind::kIdentity, 0.0}; }

  template <typename T>
  T operator()(T x) const {
    switch (kind) {
      case ActivationKind::kLeakyRelu: return x >= T{0} ? x : static_cast<T>(slope) * x;
      case ActivationKind::kRelu: return x > T{0} ? x : T{0};
      case ActivationKind::kTanh: return std::tanh(x);
      case ActivationKind::kSigmoid: return T{1} / (T{1} + std::exp(-x));
      case ActivationKind::kIdentity: return x;
    }
    return x;
  }

  /// Derivative at pre-activation x, given y = (*this)(x).
  template <typename T>
  T derivative(T x, T y) const {
    switch (kind) {
      case ActivationKind::kLeakyRelu: return x >= T{0} ? T{1} : static_cast<T>(slope);
      case ActivationKind::kRelu: return x > T{0} ? T{1} : T{0};
      case ActivationKind::kTanh: return T{1} - y * y;
      case ActivationKind::kSigmoid: return y * (T{1} - y);
      case ActivationKind::kIdentity: return T{1};
    }
    return T{1};
  }

  bool operator==(const Activation&) const = default;
};

template <typename T>
T leaky_relu(T x, T slope) {
  return x >= T{0} ? x : slope * x;
}

inline std::string to_string(const Activation& a) {
  switch (a.kind) {
    case ActivationKind::kLeakyRelu: return "leaky_relu";
    case ActivationKind::kRelu: return "relu";
    case ActivationKind::kTanh: return "tanh";
    case ActivationKind::kSigmoid: return "sigmoid";
    case ActivationKind::kIdentity: return "identity";
  }
  return "identity";
}

inline Activation parse_activation(std::string_view name, double slope = 0.2) {
  if (name == "leaky_relu") return Activation::leaky_relu(slope);
  if (name == "relu") return Activation::relu();
  if (name == "tanh") return Activation::tanh();
  if (name == "sigmoid") return Activation::sigmoid();
  if (name == "identity") return Activation::identity();
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

}  // namespace kss
