#pragma once

#include <string>

namespace dropnet {

enum class ActivationKind { relu, identity, leaky_relu, tanh, sigmoid };

// Scalar activation applied elementwise. sigma_minus/sigma_plus are the
// one-sided derivatives at 0 (left and right); they drive the zeroth-layer
// linearization and the Q admissibility check.
struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double slope = 0.01;  // leaky_relu only

  double operator()(double x) const;
  double sigma_minus() const;
  double sigma_plus() const;

  // Admissible as a zeroth layer: requires value 0 at 0. Sigmoid fails.
  bool admissible_as_zeroth() const;

  // Every supported kind is nondecreasing; the radii computation relies on it.
  bool monotone() const { return true; }

  static Activation relu() { return {ActivationKind::relu, 0.0}; }
  static Activation identity() { return {ActivationKind::identity, 0.0}; }
  static Activation leaky_relu(double s) { return {ActivationKind::leaky_relu, s}; }
  static Activation tanh() { return {ActivationKind::tanh, 0.0}; }
  static Activation sigmoid() { return {ActivationKind::sigmoid, 0.0}; }
};

std::string to_string(ActivationKind kind);
ActivationKind activation_kind_from_string(const std::string& s);

}  // namespace dropnet
