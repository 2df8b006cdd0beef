#ifndef DANCE_TOYTASK_HPP
#define DANCE_TOYTASK_HPP

#include <cstdint>
#include <vector>

#include "dance/nn/graph.hpp"
#include "dance/util.hpp"

namespace dance {

// Seeded synthetic 4-class task on 16x16x3 inputs: each class is a sinusoidal
// grating with its own orientation and frequency, random phase per sample,
// plus Gaussian pixel noise. Classes are exactly balanced.
struct ToyTaskConfig {
  int n_train = 2048;
  int n_val = 512;
  int height = 16;
  int width = 16;
  int channels = 3;
  int classes = 4;
  double noise = 1.2;
  std::uint64_t seed = 1;
};

struct ToyTask {
  nn::Mat train_x;  // [n_train x h*w*c]
  nn::Mat val_x;
  std::vector<int> train_y;
  std::vector<int> val_y;
  int input_dim = 0;
  int classes = 4;
};

ToyTask make_toy_task(const ToyTaskConfig& config);

}  // namespace dance

#endif
