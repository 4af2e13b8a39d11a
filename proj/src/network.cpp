#include "dropnet/network.hpp"

#include <string>

#include "dropnet/error.hpp"

namespace dropnet {

double hs_norm(const Eigen::MatrixXd& m) { return m.norm(); }

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), ErrorCode::invalid_argument, "network needs at least one layer");
  int offset = 0;
  for (std::size_t j = 0; j < layers_.size(); ++j) {
    const Layer& l = layers_[j];
    require(l.weight.rows() == l.bias.size(), ErrorCode::shape_mismatch,
            "layer " + std::to_string(j + 1) + ": weight rows != bias length");
    if (j > 0) {
      require(l.weight.cols() == layers_[j - 1].weight.rows(), ErrorCode::shape_mismatch,
              "layer " + std::to_string(j + 1) + ": input dim does not chain");
    }
    offsets_.push_back(offset);
    offset += l.rows() * l.cols() + l.rows();
  }
  param_count_ = offset;
}

Eigen::VectorXd Network::parameters() const {
  Eigen::VectorXd w(param_count_);
  int k = 0;
  for (const Layer& l : layers_) {
    for (int r = 0; r < l.rows(); ++r)
      for (int c = 0; c < l.cols(); ++c) w[k++] = l.weight(r, c);
    for (int r = 0; r < l.rows(); ++r) w[k++] = l.bias[r];
  }
  return w;
}

Eigen::VectorXd Network::eval(const Eigen::VectorXd& x) const { return eval_prefix(x, depth()); }

Eigen::VectorXd Network::eval_prefix(const Eigen::VectorXd& x, int k) const {
  require(x.size() == input_dim(), ErrorCode::shape_mismatch, "input length != network input dim");
  require(k >= 0 && k <= depth(), ErrorCode::invalid_argument, "layer prefix out of range");
  Eigen::VectorXd v = x;
  for (int j = 0; j < k; ++j) {
    const Layer& l = layers_[static_cast<std::size_t>(j)];
    Eigen::VectorXd z = l.weight * v + l.bias;
    for (int r = 0; r < z.size(); ++r) z[r] = l.activation(z[r]);
    v = std::move(z);
  }
  return v;
}

Eigen::VectorXd Network::eval_masked(const Eigen::VectorXd& mask, const Eigen::VectorXd& x) const {
  require(mask.size() == param_count_, ErrorCode::shape_mismatch, "mask length != parameter count");
  require(x.size() == input_dim(), ErrorCode::shape_mismatch, "input length != network input dim");
  Eigen::VectorXd v = x;
  int k = 0;
  for (const Layer& l : layers_) {
    Eigen::VectorXd z(l.rows());
    for (int r = 0; r < l.rows(); ++r) {
      double acc = 0.0;
      for (int c = 0; c < l.cols(); ++c) acc += mask[k++] * l.weight(r, c) * v[c];
      z[r] = acc;
    }
    for (int r = 0; r < l.rows(); ++r) z[r] += mask[k++] * l.bias[r];
    for (int r = 0; r < z.size(); ++r) z[r] = l.activation(z[r]);
    v = std::move(z);
  }
  return v;
}

Network Network::apply_mask(const Eigen::VectorXd& mask) const {
  require(mask.size() == param_count_, ErrorCode::shape_mismatch, "mask length != parameter count");
  std::vector<Layer> masked = layers_;
  int k = 0;
  for (Layer& l : masked) {
    for (int r = 0; r < l.rows(); ++r)
      for (int c = 0; c < l.cols(); ++c) l.weight(r, c) *= mask[k++];
    for (int r = 0; r < l.rows(); ++r) l.bias[r] *= mask[k++];
  }
  return Network(std::move(masked));
}

}  // namespace dropnet
