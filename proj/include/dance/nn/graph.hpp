#ifndef DANCE_NN_GRAPH_HPP
#define DANCE_NN_GRAPH_HPP

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace dance::nn {

using Mat = Eigen::MatrixXd;

// Trainable tensor living outside any Graph. Gradients accumulate here
// across backward() calls until zero_grad().
struct Param {
  Mat value;
  Mat grad;

  Param() = default;
  explicit Param(Mat v) : value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(); }
};

class Graph;

// Handle to a node in a Graph. Activations use the [batch x features]
// convention throughout.
class Var {
 public:
  Var() = default;
  const Mat& value() const;
  const Mat& grad() const;
  int id() const { return id_; }

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape over matrix ops. Build a fresh graph per training step;
// ops record closures that push gradients to their inputs, and backward()
// walks the tape in reverse creation order (already topological).
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // leaves
  Var input(Mat v);          // constant, no gradient
  // constant referencing external storage (no copy); the caller keeps the
  // matrix alive and unchanged for the graph's lifetime
  Var input_view(const Mat& external);
  Var param(Param& p);       // copies the value in; backward adds into p.grad

  // elementwise / structural
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);                 // hadamard
  Var scale(Var x, double c);
  Var scale_by(Var x, Var s);            // s is 1x1
  Var relu(Var x);
  Var exp(Var x);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var x, int begin, int len);
  Var elem(Var x, int r, int c);         // 1x1 view
  Var sum_squares(Var x);                // 1x1

  // linear algebra
  Var matmul(Var a, Var b);
  // y = x * W^T + b broadcast over rows; W is [out x in], b is [1 x out]
  Var linear(Var x, Var w, Var b);

  // rowwise distributions
  Var softmax_rows(Var x);
  // p = softmax((x + noise) / tau) per row; hard snaps the forward value to
  // the argmax one-hot while gradients follow the soft value. noise must
  // match x's shape. Throws if tau <= 0.
  Var gumbel_softmax_rows(Var x, double tau, const Mat& noise, bool hard);

  // losses (all 1x1, mean over batch rows)
  Var ce_with_logits(Var logits, const std::vector<int>& labels, double label_smoothing = 0.0);
  Var nll_rows(Var probs, const std::vector<int>& labels);  // -log p[label]
  // sum over columns of (1 - yhat/y)^2, mean over rows; every y must be > 0
  Var msre(Var yhat, const Mat& y);

  // Registers an op with explicit inputs and a hand-written backward; used
  // by layers whose gradient is awkward to compose from the primitives
  // (batch norm). The callback receives the upstream gradient and routes it
  // to inputs via accumulate_grad.
  Var custom(Mat value, const std::vector<int>& inputs,
             std::function<void(Graph&, const Mat&)> backprop);
  bool node_needs_grad(int id) const { return nodes_[id].needs_grad; }
  void accumulate_grad(int id, const Mat& dg) { nodes_[id].grad += dg; }

  // Seeds d(loss)/d(loss) = 1 and runs the tape backwards. loss must be 1x1
  // and finite.
  void backward(Var loss);

  const Mat& value(int id) const {
    const Node& n = nodes_[id];
    return n.view ? *n.view : n.value;
  }
  const Mat& grad(int id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Mat value;
    const Mat* view = nullptr;  // set for input_view leaves
    Mat grad;
    bool needs_grad = false;
    std::function<void(Graph&, const Node&)> backprop;
  };

  Var make(Mat value, bool needs_grad, std::function<void(Graph&, const Node&)> backprop);
  Mat& grad_ref(int id) { return nodes_[id].grad; }
  void check_same_graph(Var v) const;

  // deque: references returned by value()/grad() stay valid while new nodes
  // are appended mid-expression
  std::deque<Node> nodes_;
};

// Sum of per-head cross-entropy (means over the batch); one label vector
// per head.
Var ce_loss_multi_head(Graph& g, const std::vector<Var>& per_head_logits,
                       const std::vector<std::vector<int>>& labels);

}  // namespace dance::nn

#endif
