#include "dropnet/activation.hpp"

#include <cmath>

#include "dropnet/error.hpp"

namespace dropnet {

double Activation::operator()(double x) const {
  switch (kind) {
    case ActivationKind::relu: return x > 0.0 ? x : 0.0;
    case ActivationKind::identity: return x;
    case ActivationKind::leaky_relu: return x > 0.0 ? x : slope * x;
    case ActivationKind::tanh: return std::tanh(x);
    case ActivationKind::sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

double Activation::sigma_minus() const {
  switch (kind) {
    case ActivationKind::relu: return 0.0;
    case ActivationKind::identity: return 1.0;
    case ActivationKind::leaky_relu: return slope;
    case ActivationKind::tanh: return 1.0;
    case ActivationKind::sigmoid: return 0.25;
  }
  return 0.0;
}

double Activation::sigma_plus() const {
  switch (kind) {
    case ActivationKind::relu: return 1.0;
    case ActivationKind::identity: return 1.0;
    case ActivationKind::leaky_relu: return 1.0;
    case ActivationKind::tanh: return 1.0;
    case ActivationKind::sigmoid: return 0.25;
  }
  return 0.0;
}

bool Activation::admissible_as_zeroth() const {
  return kind != ActivationKind::sigmoid;  // sigmoid(0) = 0.5
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::identity: return "identity";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::sigmoid: return "sigmoid";
  }
  return "relu";
}

ActivationKind activation_kind_from_string(const std::string& s) {
  if (s == "relu") return ActivationKind::relu;
  if (s == "identity") return ActivationKind::identity;
  if (s == "leaky_relu") return ActivationKind::leaky_relu;
  if (s == "tanh") return ActivationKind::tanh;
  if (s == "sigmoid") return ActivationKind::sigmoid;
  throw_invalid("unknown activation kind: " + s);
}

}  // namespace dropnet
