#ifndef DANCE_NN_GRADCHECK_HPP
#define DANCE_NN_GRADCHECK_HPP

#include <functional>
#include <string>
#include <vector>

#include "dance/nn/graph.hpp"

namespace dance::nn {

struct GradcheckBlock {
  std::string name;
  double max_rel_err = 0.0;
  int entries_checked = 0;
};

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::vector<GradcheckBlock> blocks;
  bool passed(double rel_tol) const { return max_rel_err < rel_tol; }
};

struct GradcheckOptions {
  double h = 1e-4;             // central-difference step
  int max_entries_per_block = 256;
  std::uint64_t sample_seed = 7;
};

// Compares the analytic gradients left in each Param by compute_grads()
// against central finite differences of loss_fn(). loss_fn must be a pure
// function of the parameter values (freeze any noise and batch-norm
// running-stat updates first); compute_grads must zero the grads, run one
// forward/backward and return the same loss value. Blocks larger than
// max_entries_per_block are subsampled deterministically. Throws on
// non-finite values.
GradcheckReport gradcheck(const std::function<double()>& loss_fn,
                          const std::vector<std::pair<std::string, Param*>>& params,
                          const std::function<double()>& compute_grads,
                          const GradcheckOptions& options = {});

}  // namespace dance::nn

#endif
