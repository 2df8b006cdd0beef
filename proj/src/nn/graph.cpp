#include "dance/nn/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace dance::nn {

const Mat& Var::value() const { return graph_->value(id_); }
const Mat& Var::grad() const { return graph_->grad(id_); }

Var Graph::make(Mat value, bool needs_grad, std::function<void(Graph&, const Node&)> backprop) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::check_same_graph(Var v) const {
  if (v.graph_ != this || v.id_ < 0 || v.id_ >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("Var does not belong to this graph");
}

Var Graph::input(Mat v) { return make(std::move(v), false, nullptr); }

Var Graph::input_view(const Mat& external) {
  Node node;
  node.view = &external;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::param(Param& p) {
  return make(p.value, true, [&p](Graph&, const Node& n) { p.grad += n.grad; });
}

Var Graph::add(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Mat& av = value(a.id_);
  const Mat& bv = value(b.id_);
  if (av.rows() != bv.rows() || av.cols() != bv.cols())
    throw std::invalid_argument("add: shape mismatch");
  const int ia = a.id_, ib = b.id_;
  return make(av + bv, nodes_[ia].needs_grad || nodes_[ib].needs_grad,
              [ia, ib](Graph& g, const Node& n) {
                if (g.nodes_[ia].needs_grad) g.grad_ref(ia) += n.grad;
                if (g.nodes_[ib].needs_grad) g.grad_ref(ib) += n.grad;
              });
}

Var Graph::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Graph::mul(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Mat& av = value(a.id_);
  const Mat& bv = value(b.id_);
  if (av.rows() != bv.rows() || av.cols() != bv.cols())
    throw std::invalid_argument("mul: shape mismatch");
  const int ia = a.id_, ib = b.id_;
  return make(av.cwiseProduct(bv), nodes_[ia].needs_grad || nodes_[ib].needs_grad,
              [ia, ib](Graph& g, const Node& n) {
                if (g.nodes_[ia].needs_grad)
                  g.grad_ref(ia) += n.grad.cwiseProduct(g.value(ib));
                if (g.nodes_[ib].needs_grad)
                  g.grad_ref(ib) += n.grad.cwiseProduct(g.value(ia));
              });
}

Var Graph::scale(Var x, double c) {
  check_same_graph(x);
  const int ix = x.id_;
  return make(value(ix) * c, nodes_[ix].needs_grad, [ix, c](Graph& g, const Node& n) {
    if (g.nodes_[ix].needs_grad) g.grad_ref(ix) += n.grad * c;
  });
}

Var Graph::scale_by(Var x, Var s) {
  check_same_graph(x);
  check_same_graph(s);
  if (value(s.id_).size() != 1) throw std::invalid_argument("scale_by: scale must be 1x1");
  const int ix = x.id_, is = s.id_;
  const double sv = value(is)(0, 0);
  return make(value(ix) * sv, nodes_[ix].needs_grad || nodes_[is].needs_grad,
              [ix, is, sv](Graph& g, const Node& n) {
                if (g.nodes_[ix].needs_grad) g.grad_ref(ix) += n.grad * sv;
                if (g.nodes_[is].needs_grad)
                  g.grad_ref(is)(0, 0) += n.grad.cwiseProduct(g.value(ix)).sum();
              });
}

Var Graph::relu(Var x) {
  check_same_graph(x);
  const int ix = x.id_;
  return make(value(ix).cwiseMax(0.0), nodes_[ix].needs_grad, [ix](Graph& g, const Node& n) {
    if (!g.nodes_[ix].needs_grad) return;
    g.grad_ref(ix) +=
        n.grad.cwiseProduct((g.value(ix).array() > 0.0).cast<double>().matrix());
  });
}

Var Graph::exp(Var x) {
  check_same_graph(x);
  const int ix = x.id_;
  Mat out = value(ix).array().exp().matrix();
  return make(std::move(out), nodes_[ix].needs_grad, [ix](Graph& g, const Node& n) {
    if (g.nodes_[ix].needs_grad) g.grad_ref(ix) += n.grad.cwiseProduct(n.value);
  });
}

Var Graph::concat_cols(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Mat& av = value(a.id_);
  const Mat& bv = value(b.id_);
  if (av.rows() != bv.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Mat out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  const int ia = a.id_, ib = b.id_;
  const auto ca = av.cols();
  return make(std::move(out), nodes_[ia].needs_grad || nodes_[ib].needs_grad,
              [ia, ib, ca](Graph& g, const Node& n) {
                if (g.nodes_[ia].needs_grad)
                  g.grad_ref(ia) += n.grad.leftCols(ca);
                if (g.nodes_[ib].needs_grad)
                  g.grad_ref(ib) += n.grad.rightCols(n.grad.cols() - ca);
              });
}

Var Graph::slice_cols(Var x, int begin, int len) {
  check_same_graph(x);
  const Mat& xv = value(x.id_);
  if (begin < 0 || len < 1 || begin + len > xv.cols())
    throw std::invalid_argument("slice_cols: range out of bounds");
  const int ix = x.id_;
  return make(xv.middleCols(begin, len), nodes_[ix].needs_grad,
              [ix, begin, len](Graph& g, const Node& n) {
                if (g.nodes_[ix].needs_grad)
                  g.grad_ref(ix).middleCols(begin, len) += n.grad;
              });
}

Var Graph::elem(Var x, int r, int c) {
  check_same_graph(x);
  const Mat& xv = value(x.id_);
  if (r < 0 || c < 0 || r >= xv.rows() || c >= xv.cols())
    throw std::invalid_argument("elem: index out of bounds");
  const int ix = x.id_;
  Mat out(1, 1);
  out(0, 0) = xv(r, c);
  return make(std::move(out), nodes_[ix].needs_grad, [ix, r, c](Graph& g, const Node& n) {
    if (g.nodes_[ix].needs_grad) g.grad_ref(ix)(r, c) += n.grad(0, 0);
  });
}

Var Graph::sum_squares(Var x) {
  check_same_graph(x);
  const int ix = x.id_;
  Mat out(1, 1);
  out(0, 0) = value(ix).squaredNorm();
  return make(std::move(out), nodes_[ix].needs_grad, [ix](Graph& g, const Node& n) {
    if (g.nodes_[ix].needs_grad) g.grad_ref(ix) += 2.0 * n.grad(0, 0) * g.value(ix);
  });
}

Var Graph::matmul(Var a, Var b) {
  check_same_graph(a);
  check_same_graph(b);
  const Mat& av = value(a.id_);
  const Mat& bv = value(b.id_);
  if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: inner dim mismatch");
  const int ia = a.id_, ib = b.id_;
  return make(av * bv, nodes_[ia].needs_grad || nodes_[ib].needs_grad,
              [ia, ib](Graph& g, const Node& n) {
                if (g.nodes_[ia].needs_grad)
                  g.grad_ref(ia).noalias() += n.grad * g.value(ib).transpose();
                if (g.nodes_[ib].needs_grad)
                  g.grad_ref(ib).noalias() += g.value(ia).transpose() * n.grad;
              });
}

Var Graph::linear(Var x, Var w, Var b) {
  check_same_graph(x);
  check_same_graph(w);
  check_same_graph(b);
  const Mat& xv = value(x.id_);
  const Mat& wv = value(w.id_);
  const Mat& bv = value(b.id_);
  if (xv.cols() != wv.cols())
    throw std::invalid_argument("linear: input width does not match weight fan-in");
  if (bv.rows() != 1 || bv.cols() != wv.rows())
    throw std::invalid_argument("linear: bias must be [1 x out]");
  Mat out = xv * wv.transpose();
  out.rowwise() += bv.row(0);
  const int ix = x.id_, iw = w.id_, ib = b.id_;
  const bool needs =
      nodes_[ix].needs_grad || nodes_[iw].needs_grad || nodes_[ib].needs_grad;
  return make(std::move(out), needs, [ix, iw, ib](Graph& g, const Node& n) {
    if (g.nodes_[ix].needs_grad) g.grad_ref(ix).noalias() += n.grad * g.value(iw);
    if (g.nodes_[iw].needs_grad)
      g.grad_ref(iw).noalias() += n.grad.transpose() * g.value(ix);
    if (g.nodes_[ib].needs_grad) g.grad_ref(ib) += n.grad.colwise().sum();
  });
}

namespace {

Mat softmax_of(const Mat& x) {
  Mat p = x;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

// dx = p .* (dy - rowwise_dot(dy, p))
void softmax_backprop(const Mat& p, const Mat& upstream, Mat& dst, double inv_tau) {
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double dot = upstream.row(r).dot(p.row(r));
    dst.row(r) +=
        inv_tau * (p.row(r).array() * (upstream.row(r).array() - dot)).matrix();
  }
}

}  // namespace

Var Graph::softmax_rows(Var x) {
  check_same_graph(x);
  const int ix = x.id_;
  Mat p = softmax_of(value(ix));
  return make(std::move(p), nodes_[ix].needs_grad, [ix](Graph& g, const Node& n) {
    if (g.nodes_[ix].needs_grad) softmax_backprop(n.value, n.grad, g.grad_ref(ix), 1.0);
  });
}

Var Graph::gumbel_softmax_rows(Var x, double tau, const Mat& noise, bool hard) {
  check_same_graph(x);
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_softmax: temperature must be > 0");
  const Mat& xv = value(x.id_);
  if (noise.rows() != xv.rows() || noise.cols() != xv.cols())
    throw std::invalid_argument("gumbel_softmax: noise shape mismatch");

  Mat soft = softmax_of((xv + noise) / tau);
  Mat out = soft;
  if (hard) {
    out.setZero();
    for (Eigen::Index r = 0; r < soft.rows(); ++r) {
      Eigen::Index arg = 0;
      soft.row(r).maxCoeff(&arg);
      out(r, arg) = 1.0;
    }
  }
  // straight-through: gradients always use the soft distribution
  const int ix = x.id_;
  return make(std::move(out), nodes_[ix].needs_grad,
              [ix, tau, soft = std::move(soft)](Graph& g, const Node& n) {
                if (g.nodes_[ix].needs_grad)
                  softmax_backprop(soft, n.grad, g.grad_ref(ix), 1.0 / tau);
              });
}

Var Graph::ce_with_logits(Var logits, const std::vector<int>& labels, double label_smoothing) {
  check_same_graph(logits);
  const Mat& xv = value(logits.id_);
  if (static_cast<Eigen::Index>(labels.size()) != xv.rows())
    throw std::invalid_argument("ce_with_logits: one label per row required");
  for (int y : labels)
    if (y < 0 || y >= xv.cols()) throw std::invalid_argument("ce_with_logits: label out of range");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw std::invalid_argument("ce_with_logits: label smoothing must be in [0, 1)");

  // target q = (1 - eps) one-hot + eps / K
  const double eps = label_smoothing;
  const double k = double(xv.cols());
  Mat p = softmax_of(xv);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mx = xv.row(r).maxCoeff();
    const double lse = std::log((xv.row(r).array() - mx).exp().sum()) + mx;
    loss += (1.0 - eps) * (lse - xv(r, labels[r]));
    if (eps > 0.0) loss += (eps / k) * (k * lse - xv.row(r).sum());
  }
  Mat out(1, 1);
  out(0, 0) = loss / double(xv.rows());

  const int ix = logits.id_;
  return make(std::move(out), nodes_[ix].needs_grad,
              [ix, labels, eps, k, p = std::move(p)](Graph& g, const Node& n) {
                if (!g.nodes_[ix].needs_grad) return;
                const double s = n.grad(0, 0) / double(p.rows());
                Mat d = (p.array() - eps / k).matrix();
                for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, labels[r]) -= 1.0 - eps;
                g.grad_ref(ix) += s * d;
              });
}

Var Graph::nll_rows(Var probs, const std::vector<int>& labels) {
  check_same_graph(probs);
  const Mat& pv = value(probs.id_);
  if (static_cast<Eigen::Index>(labels.size()) != pv.rows())
    throw std::invalid_argument("nll_rows: one label per row required");
  double loss = 0.0;
  for (Eigen::Index r = 0; r < pv.rows(); ++r) {
    if (labels[r] < 0 || labels[r] >= pv.cols())
      throw std::invalid_argument("nll_rows: label out of range");
    loss -= std::log(pv(r, labels[r]));
  }
  Mat out(1, 1);
  out(0, 0) = loss / double(pv.rows());
  const int ip = probs.id_;
  return make(std::move(out), nodes_[ip].needs_grad, [ip, labels](Graph& g, const Node& n) {
    if (!g.nodes_[ip].needs_grad) return;
    const double s = n.grad(0, 0) / double(labels.size());
    Mat& dst = g.grad_ref(ip);
    for (std::size_t r = 0; r < labels.size(); ++r)
      dst(r, labels[r]) -= s / g.value(ip)(r, labels[r]);
  });
}

Var Graph::msre(Var yhat, const Mat& y) {
  check_same_graph(yhat);
  const Mat& pv = value(yhat.id_);
  if (pv.rows() != y.rows() || pv.cols() != y.cols())
    throw std::invalid_argument("msre: shape mismatch");
  if ((y.array() <= 0.0).any())
    throw std::invalid_argument("msre: ground-truth values must be > 0");

  const Mat rel = Mat::Ones(y.rows(), y.cols()) - pv.cwiseQuotient(y);
  Mat out(1, 1);
  out(0, 0) = rel.squaredNorm() / double(y.rows());

  const int ih = yhat.id_;
  return make(std::move(out), nodes_[ih].needs_grad,
              [ih, y, rel](Graph& g, const Node& n) {
                if (!g.nodes_[ih].needs_grad) return;
                const double s = n.grad(0, 0) / double(y.rows());
                g.grad_ref(ih) -= 2.0 * s * rel.cwiseQuotient(y);
              });
}

Var Graph::custom(Mat value, const std::vector<int>& inputs,
                  std::function<void(Graph&, const Mat&)> backprop) {
  bool needs = false;
  for (int id : inputs) {
    if (id < 0 || id >= static_cast<int>(nodes_.size()))
      throw std::invalid_argument("custom: input id out of range");
    needs = needs || nodes_[id].needs_grad;
  }
  return make(std::move(value), needs,
              [fn = std::move(backprop)](Graph& g, const Node& n) { fn(g, n.grad); });
}

void Graph::backward(Var loss) {
  check_same_graph(loss);
  const Mat& lv = value(loss.id_);
  if (lv.rows() != 1 || lv.cols() != 1) throw std::invalid_argument("backward: loss must be 1x1");
  if (!std::isfinite(lv(0, 0))) throw std::runtime_error("backward: loss is not finite");

  for (auto& node : nodes_) {
    if (!node.needs_grad) continue;
    node.grad.resize(node.value.rows(), node.value.cols());
    node.grad.setZero();
  }
  nodes_[loss.id_].grad(0, 0) = 1.0;

  for (int i = loss.id_; i >= 0; --i) {
    const Node& node = nodes_[i];
    if (node.backprop && node.needs_grad) node.backprop(*this, node);
  }
}

Var ce_loss_multi_head(Graph& g, const std::vector<Var>& per_head_logits,
                       const std::vector<std::vector<int>>& labels) {
  if (per_head_logits.empty() || per_head_logits.size() != labels.size())
    throw std::invalid_argument("ce_loss_multi_head: heads and labels must align");
  Var total = g.ce_with_logits(per_head_logits[0], labels[0]);
  for (std::size_t h = 1; h < per_head_logits.size(); ++h)
    total = g.add(total, g.ce_with_logits(per_head_logits[h], labels[h]));
  return total;
}

}  // namespace dance::nn
