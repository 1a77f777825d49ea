#pragma once

#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "nmstpp/types.hpp"

namespace nmstpp::ad {

/// Handle into a Tape node.
struct Var {
  int index = -1;
  bool valid() const { return index >= 0; }
};

/// Reverse-mode autodiff over dense double matrices. Nodes are created in
/// topological order; backward() walks them in reverse. One tape per forward
/// pass; tapes are cheap and never reused across batches.
class Tape {
 public:
  Var input(Eigen::MatrixXd value, bool requires_grad = false);
  Var constant(double scalar);

  const Eigen::MatrixXd& value(Var v) const;
  /// Gradient of the last backward() root w.r.t. v (zero matrix if untouched).
  Eigen::MatrixXd grad(Var v) const;

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  /// Broadcast add of a 1 x k bias row onto every row of x.
  Var add_rowvec(Var x, Var bias);
  Var matmul(Var a, Var b);
  /// a * b^T without materializing the transpose.
  Var matmul_nt(Var a, Var b);
  Var concat_cols(const std::vector<Var>& parts);
  Var vstack(const std::vector<Var>& parts);
  Var slice_rows(Var a, int start, int rows);
  Var row(Var a, int r) { return slice_rows(a, r, 1); }
  /// Row lookup into an embedding table; ids are 1-based class ids.
  Var embedding_rows(Var table, const std::vector<int>& ids);
  Var softmax_rows(Var a);
  Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  /// Inverted dropout; identity when rate == 0.
  Var dropout(Var a, double rate, std::mt19937_64& rng);
  Var sum(Var a);

  /// sqrt(mean((pred - target)^2)) over a B x 1 column; 1 x 1 output.
  Var rmse_column(Var pred, const Eigen::VectorXd& target);
  /// Class-weighted cross entropy over softmaxed logits, normalized by the
  /// mean of the per-sample weights. Targets are 1-based. 1 x 1 output.
  Var weighted_cross_entropy(Var logits, const std::vector<int>& targets,
                             const Eigen::VectorXd& class_weights);

  /// Seeds d(root)/d(root) = 1 and accumulates into every reachable input.
  /// root must be 1 x 1.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;  // empty until touched by backward
    bool requires_grad = false;
    std::function<void(Tape&)> backprop;  // empty for leaves
  };

  Var emplace(Eigen::MatrixXd value, bool requires_grad,
              std::function<void(Tape&)> backprop);
  bool needs(Var v) const { return nodes_[v.index].requires_grad; }
  void accumulate(Var v, const Eigen::MatrixXd& g);
  /// Adds g into rows [start, start+g.rows()) of v's gradient.
  void accumulate_rows(Var v, int start, const Eigen::MatrixXd& g);
  const Eigen::MatrixXd& grad_ref(Var v) const { return nodes_[v.index].grad; }
  void check(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace nmstpp::ad
