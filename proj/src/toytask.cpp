#include "dance/toytask.hpp"

#include <cmath>
#include <stdexcept>

namespace dance {

namespace {

void fill_split(nn::Mat& x, std::vector<int>& y, int n, const ToyTaskConfig& cfg, Rng& rng) {
  const int dim = cfg.height * cfg.width * cfg.channels;
  x.resize(n, dim);
  y.resize(n);
  for (int i = 0; i < n; ++i) {
    const int cls = i % cfg.classes;
    y[i] = cls;
    const double theta = M_PI * cls / cfg.classes;
    const double freq = 1.5 + 0.75 * cls;
    const double phase = rng.next_uniform(0.0, 2.0 * M_PI);
    int at = 0;
    for (int ch = 0; ch < cfg.channels; ++ch) {
      const double ch_shift = 2.0 * M_PI * ch / cfg.channels;
      for (int r = 0; r < cfg.height; ++r)
        for (int c = 0; c < cfg.width; ++c) {
          const double u = double(c) / cfg.width;
          const double v = double(r) / cfg.height;
          const double t = u * std::cos(theta) + v * std::sin(theta);
          x(i, at++) = std::sin(2.0 * M_PI * freq * t + phase + ch_shift) +
                       cfg.noise * rng.next_normal();
        }
    }
  }
}

}  // namespace

ToyTask make_toy_task(const ToyTaskConfig& config) {
  if (config.n_train < config.classes || config.n_val < config.classes)
    throw std::invalid_argument("toy task: splits must cover every class");
  if (config.n_train % config.classes != 0 || config.n_val % config.classes != 0)
    throw std::invalid_argument("toy task: split sizes must be multiples of the class count");

  ToyTask task;
  task.input_dim = config.height * config.width * config.channels;
  task.classes = config.classes;
  Rng rng(mix_seed(config.seed, 0x707));
  fill_split(task.train_x, task.train_y, config.n_train, config, rng);
  fill_split(task.val_x, task.val_y, config.n_val, config, rng);
  return task;
}

}  // namespace dance
