#include "dance/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace dance::nn {

DenseLayer::DenseLayer(int in, int out, Rng& rng) {
  if (in < 1 || out < 1) throw std::invalid_argument("DenseLayer: dims must be >= 1");
  const double bound = std::sqrt(6.0 / double(in + out));
  Mat w(out, in);
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) w(r, c) = rng.next_uniform(-bound, bound);
  weight = Param(std::move(w));
  bias = Param(Mat::Zero(1, out));
}

Var DenseLayer::forward(Graph& g, Var x, bool frozen) {
  if (frozen) return g.linear(x, g.input_view(weight.value), g.input_view(bias.value));
  return g.linear(x, g.param(weight), g.param(bias));
}

BatchNormLayer::BatchNormLayer(int features) {
  if (features < 1) throw std::invalid_argument("BatchNormLayer: features must be >= 1");
  gamma = Param(Mat::Ones(1, features));
  beta = Param(Mat::Zero(1, features));
  running_mean = Mat::Zero(1, features);
  running_var = Mat::Ones(1, features);
}

Var BatchNormLayer::forward(Graph& g, Var x, bool training, bool frozen) {
  const Mat& xv = x.value();
  if (xv.cols() != gamma.value.cols()) throw std::invalid_argument("batchnorm: feature mismatch");

  const Var vg = frozen ? g.input_view(gamma.value) : g.param(gamma);
  const Var vb = frozen ? g.input_view(beta.value) : g.param(beta);
  const int ix = x.id(), ig = vg.id(), ib = vb.id();

  Mat mean, var;
  if (training) {
    mean = xv.colwise().mean();
    var = (xv.rowwise() - mean.row(0)).array().square().colwise().mean();
    if (update_running_stats) {
      running_mean = (1.0 - momentum) * running_mean + momentum * mean;
      running_var = (1.0 - momentum) * running_var + momentum * var;
    }
  } else {
    mean = running_mean;
    var = running_var;
  }

  Mat inv_std = (var.array() + eps).sqrt().inverse().matrix();  // [1 x f]

  if (!training) {
    // y is affine in x with fixed statistics: y = x .* scale + shift
    const Mat scale = (gamma.value.array() * inv_std.array()).matrix();
    Mat shift = beta.value - (mean.array() * scale.array()).matrix();
    Mat y = xv.array().rowwise() * scale.row(0).array();
    y.rowwise() += shift.row(0);
    // xhat is rebuilt only if the affine parameters themselves need
    // gradients, which never happens in frozen use
    Mat mean_copy = mean;
    return g.custom(std::move(y), {ix, ig, ib},
                    [ix, ig, ib, mean = std::move(mean_copy), inv_std](Graph& gg, const Mat& dy) {
                      if (gg.node_needs_grad(ig)) {
                        const Mat xhat = (gg.value(ix).rowwise() - mean.row(0)).array().rowwise() *
                                         inv_std.row(0).array();
                        gg.accumulate_grad(ig, dy.cwiseProduct(xhat).colwise().sum());
                      }
                      if (gg.node_needs_grad(ib)) gg.accumulate_grad(ib, dy.colwise().sum());
                      if (!gg.node_needs_grad(ix)) return;
                      Mat dx = dy.array().rowwise() *
                               (gg.value(ig).row(0).array() * inv_std.row(0).array());
                      gg.accumulate_grad(ix, dx);
                    });
  }

  Mat xhat = (xv.rowwise() - mean.row(0)).array().rowwise() * inv_std.row(0).array();
  Mat y = xhat.array().rowwise() * gamma.value.row(0).array();
  y.rowwise() += beta.value.row(0);

  const double b = double(xv.rows());
  return g.custom(std::move(y), {ix, ig, ib},
                  [ix, ig, ib, b, xhat, inv_std](Graph& gg, const Mat& dy) {
                    if (gg.node_needs_grad(ig))
                      gg.accumulate_grad(ig, dy.cwiseProduct(xhat).colwise().sum());
                    if (gg.node_needs_grad(ib)) gg.accumulate_grad(ib, dy.colwise().sum());
                    if (!gg.node_needs_grad(ix)) return;
                    Mat dxhat = dy.array().rowwise() * gg.value(ig).row(0).array();
                    Mat sum_dxhat = dxhat.colwise().sum();                        // [1 x f]
                    Mat sum_dxhat_xhat = dxhat.cwiseProduct(xhat).colwise().sum();
                    Mat dx = dxhat;
                    dx.rowwise() -= (sum_dxhat / b).row(0);
                    dx -= (xhat.array().rowwise() * (sum_dxhat_xhat / b).row(0).array()).matrix();
                    dx = dx.array().rowwise() * inv_std.row(0).array();
                    gg.accumulate_grad(ix, dx);
                  });
}

}  // namespace dance::nn
