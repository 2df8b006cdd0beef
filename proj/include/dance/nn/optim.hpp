#ifndef DANCE_NN_OPTIM_HPP
#define DANCE_NN_OPTIM_HPP

#include <vector>

#include "dance/nn/graph.hpp"

namespace dance::nn {

// Both optimizers bind to a fixed parameter list at construction and keep
// per-parameter state. step() consumes the accumulated gradients and throws
// if an update would produce a non-finite value; parameters are never
// silently poisoned.

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.0;
  double weight_decay = 0.0;
  bool nesterov = false;
};

class SgdOptimizer {
 public:
  SgdOptimizer(std::vector<Param*> params, SgdConfig config);
  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  void step();
  void zero_grad();

 private:
  std::vector<Param*> params_;
  std::vector<Mat> velocity_;
  SgdConfig config_;
};

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Param*> params, AdamConfig config);
  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  void step();
  void zero_grad();
  std::int64_t step_count() const { return step_; }

 private:
  std::vector<Param*> params_;
  std::vector<Mat> m_, v_;
  AdamConfig config_;
  std::int64_t step_ = 0;
};

// lr0 * gamma^(epoch / every), integer division
double step_decay_lr(double lr0, double gamma, int every, int epoch);
// half-cosine from lr0 down to 0 across total_epochs
double cosine_lr(double lr0, int epoch, int total_epochs);

}  // namespace dance::nn

#endif
