#pragma once

#include <vector>

#include "dropnet/estimators.hpp"
#include "dropnet/network.hpp"

namespace dropnet {

struct FitConfig {
  std::vector<int> dims;                   // d_0, d_1, ..., d_L
  std::vector<Activation> activations;     // one per layer; last must be identity
  int budget = 300;                        // refinement iterations
  int grid_points = 256;                   // fitting grid per axis
  int restarts = 4;                        // random hidden initializations
  double init_scale = 2.0;                 // uniform init range for hidden params
  double ridge = 1e-10;                    // regularization of the output solve
};

struct FitResult {
  Network net;
  double sup_error;  // sup |net - target| on the fitting grid
};

// Random-feature fit: hidden layers are randomly initialized (best of
// `restarts`), the output layer is solved by ridge least squares, and the
// hidden parameters are then refined by pattern search with the output layer
// re-solved at every probe. Deterministic given the rng source.
FitResult fit_base_network(const TargetFunction& target, const FitConfig& config, rng::Source rng);

}  // namespace dropnet
