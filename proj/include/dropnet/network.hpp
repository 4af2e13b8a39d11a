#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dropnet/activation.hpp"

namespace dropnet {

struct Layer {
  Eigen::MatrixXd weight;  // d_j x d_{j-1}
  Eigen::VectorXd bias;    // d_j
  Activation activation;

  int rows() const { return static_cast<int>(weight.rows()); }
  int cols() const { return static_cast<int>(weight.cols()); }
};

double hs_norm(const Eigen::MatrixXd& m);

// Feed-forward network: composition of layers x -> sigma(Wx + b). Immutable
// after construction; every evaluation is pure and safe to call concurrently.
//
// Parameter flattening order is fixed and part of the file format: layers in
// order, within a layer the weight entries row-major, then the bias entries.
// Subset masks and filter models index parameters in this order.
class Network {
 public:
  explicit Network(std::vector<Layer> layers);

  int depth() const { return static_cast<int>(layers_.size()); }
  int input_dim() const { return layers_.front().cols(); }
  int output_dim() const { return layers_.back().rows(); }
  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(int j) const { return layers_[static_cast<std::size_t>(j - 1)]; }  // 1-based

  int param_count() const { return param_count_; }
  // Flat index of the first parameter of layer j (1-based); weights precede bias.
  int layer_offset(int j) const { return offsets_[static_cast<std::size_t>(j - 1)]; }

  Eigen::VectorXd parameters() const;

  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;
  // Applies layers 1..k only (k = 0 returns x unchanged).
  Eigen::VectorXd eval_prefix(const Eigen::VectorXd& x, int k) const;

  // Evaluates with each parameter multiplied by its mask entry. Mask entries
  // may be any reals; expectation-replacement passes values in [0, 1].
  Eigen::VectorXd eval_masked(const Eigen::VectorXd& mask, const Eigen::VectorXd& x) const;

  // Network with the mask baked into weights and biases.
  Network apply_mask(const Eigen::VectorXd& mask) const;

 private:
  std::vector<Layer> layers_;
  std::vector<int> offsets_;
  int param_count_ = 0;
};

}  // namespace dropnet
