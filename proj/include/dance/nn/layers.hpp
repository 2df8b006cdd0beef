#ifndef DANCE_NN_LAYERS_HPP
#define DANCE_NN_LAYERS_HPP

#include <string>
#include <vector>

#include "dance/nn/graph.hpp"
#include "dance/util.hpp"

namespace dance::nn {

// Glorot-uniform weight, zero bias.
struct DenseLayer {
  Param weight;  // [out x in]
  Param bias;    // [1 x out]

  DenseLayer() = default;
  DenseLayer(int in, int out, Rng& rng);

  // frozen registers the weights as constants: no gradient work, no updates
  Var forward(Graph& g, Var x, bool frozen = false);
  std::vector<Param*> params() { return {&weight, &bias}; }
  int fan_in() const { return static_cast<int>(weight.value.cols()); }
  int fan_out() const { return static_cast<int>(weight.value.rows()); }
};

// Per-feature batch normalization over the batch (row) dimension.
// Training mode normalizes with batch statistics and folds them into the
// running estimates; eval mode uses the running estimates only.
struct BatchNormLayer {
  Param gamma;  // [1 x f]
  Param beta;   // [1 x f]
  Mat running_mean;
  Mat running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  // gradcheck re-evaluates the forward pass many times; freezing the
  // running-stat update keeps it a pure function
  bool update_running_stats = true;

  BatchNormLayer() = default;
  explicit BatchNormLayer(int features);

  Var forward(Graph& g, Var x, bool training, bool frozen = false);
  std::vector<Param*> params() { return {&gamma, &beta}; }
};

inline Var residual_add(Graph& g, Var x, Var f_x) { return g.add(x, f_x); }

}  // namespace dance::nn

#endif
