#include "dance/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace dance::nn {

namespace {
void check_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw std::runtime_error(std::string("optimizer produced non-finite ") + what);
}
}  // namespace

SgdOptimizer::SgdOptimizer(std::vector<Param*> params, SgdConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.lr >= 0)) throw std::invalid_argument("sgd: lr must be >= 0");
  velocity_.reserve(params_.size());
  for (Param* p : params_) velocity_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
}

void SgdOptimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    Mat g = p.grad;
    if (config_.weight_decay != 0.0) g += config_.weight_decay * p.value;
    if (config_.momentum != 0.0) {
      velocity_[i] = config_.momentum * velocity_[i] + g;
      g = config_.nesterov ? Mat(g + config_.momentum * velocity_[i]) : velocity_[i];
    }
    p.value -= config_.lr * g;
    check_finite(p.value, "parameters");
  }
}

void SgdOptimizer::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

AdamOptimizer::AdamOptimizer(std::vector<Param*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.lr >= 0)) throw std::invalid_argument("adam: lr must be >= 0");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Param* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamOptimizer::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, double(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, double(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    const Mat mhat = m_[i] / bc1;
    const Mat vhat = v_[i] / bc2;
    p.value -=
        config_.lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + config_.eps).matrix());
    check_finite(p.value, "parameters");
  }
}

void AdamOptimizer::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

double step_decay_lr(double lr0, double gamma, int every, int epoch) {
  if (every < 1) throw std::invalid_argument("step_decay: every must be >= 1");
  return lr0 * std::pow(gamma, double(epoch / every));
}

double cosine_lr(double lr0, int epoch, int total_epochs) {
  if (total_epochs < 1) throw std::invalid_argument("cosine_lr: total epochs must be >= 1");
  const double t = std::min(std::max(double(epoch) / double(total_epochs), 0.0), 1.0);
  return lr0 * 0.5 * (1.0 + std::cos(M_PI * t));
}

}  // namespace dance::nn
