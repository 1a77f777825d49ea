#include "nmstpp/autodiff.hpp"

#include <cmath>

namespace nmstpp::ad {

Var Tape::emplace(Eigen::MatrixXd value, bool requires_grad,
                  std::function<void(Tape&)> backprop) {
  if (!value.allFinite())
    throw Error("autodiff: non-finite values produced at node " +
                std::to_string(nodes_.size()));
  nodes_.push_back(
      Node{std::move(value), {}, requires_grad, std::move(backprop)});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(Var v) const {
  if (!v.valid() || v.index >= static_cast<int>(nodes_.size()))
    throw Error("autodiff: invalid Var handle");
}

Var Tape::input(Eigen::MatrixXd value, bool requires_grad) {
  return emplace(std::move(value), requires_grad, {});
}

Var Tape::constant(double scalar) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = scalar;
  return emplace(std::move(m), false, {});
}

const Eigen::MatrixXd& Tape::value(Var v) const {
  check(v);
  return nodes_[v.index].value;
}

Eigen::MatrixXd Tape::grad(Var v) const {
  check(v);
  const Node& n = nodes_[v.index];
  if (n.grad.size() == 0)
    return Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Eigen::MatrixXd& g) {
  Node& n = nodes_[v.index];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  n.grad += g;
}

void Tape::accumulate_rows(Var v, int start, const Eigen::MatrixXd& g) {
  Node& n = nodes_[v.index];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  n.grad.middleRows(start, g.rows()) += g;
}

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
    throw Error("add: shape mismatch");
  Var out = emplace(value(a) + value(b), needs(a) || needs(b), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, b, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad_ref(out);
      t.accumulate(a, g);
      t.accumulate(b, g);
    };
  return out;
}

Var Tape::sub(Var a, Var b) {
  check(a);
  check(b);
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
    throw Error("sub: shape mismatch");
  Var out = emplace(value(a) - value(b), needs(a) || needs(b), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, b, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad_ref(out);
      t.accumulate(a, g);
      t.accumulate(b, -g);
    };
  return out;
}

Var Tape::scale(Var a, double s) {
  check(a);
  Var out = emplace(value(a) * s, needs(a), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, s, out](Tape& t) {
      t.accumulate(a, t.grad_ref(out) * s);
    };
  return out;
}

Var Tape::add_rowvec(Var x, Var bias) {
  check(x);
  check(bias);
  if (value(bias).rows() != 1 || value(bias).cols() != value(x).cols())
    throw Error("add_rowvec: bias must be 1 x cols(x)");
  Eigen::MatrixXd v = value(x);
  v.rowwise() += value(bias).row(0);
  Var out = emplace(std::move(v), needs(x) || needs(bias), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [x, bias, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad_ref(out);
      t.accumulate(x, g);
      t.accumulate(bias, g.colwise().sum());
    };
  return out;
}

Var Tape::matmul(Var a, Var b) {
  check(a);
  check(b);
  if (value(a).cols() != value(b).rows()) throw Error("matmul: shape mismatch");
  Var out = emplace(value(a) * value(b), needs(a) || needs(b), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, b, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad_ref(out);
      t.accumulate(a, g * t.value(b).transpose());
      t.accumulate(b, t.value(a).transpose() * g);
    };
  return out;
}

Var Tape::matmul_nt(Var a, Var b) {
  check(a);
  check(b);
  if (value(a).cols() != value(b).cols())
    throw Error("matmul_nt: shape mismatch");
  Var out = emplace(value(a) * value(b).transpose(), needs(a) || needs(b), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, b, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad_ref(out);
      t.accumulate(a, g * t.value(b));
      t.accumulate(b, g.transpose() * t.value(a));
    };
  return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_cols: no parts");
  Eigen::Index rows = value(parts[0]).rows(), cols = 0;
  bool req = false;
  for (Var p : parts) {
    check(p);
    if (value(p).rows() != rows) throw Error("concat_cols: row mismatch");
    cols += value(p).cols();
    req = req || needs(p);
  }
  Eigen::MatrixXd v(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    v.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  Var out = emplace(std::move(v), req, {});
  if (req)
    nodes_[out.index].backprop = [parts, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad_ref(out);
      Eigen::Index at = 0;
      for (Var p : parts) {
        const Eigen::Index c = t.value(p).cols();
        t.accumulate(p, g.middleCols(at, c));
        at += c;
      }
    };
  return out;
}

Var Tape::vstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("vstack: no parts");
  Eigen::Index cols = value(parts[0]).cols(), rows = 0;
  bool req = false;
  for (Var p : parts) {
    check(p);
    if (value(p).cols() != cols) throw Error("vstack: column mismatch");
    rows += value(p).rows();
    req = req || needs(p);
  }
  Eigen::MatrixXd v(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    v.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  Var out = emplace(std::move(v), req, {});
  if (req)
    nodes_[out.index].backprop = [parts, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad_ref(out);
      Eigen::Index at = 0;
      for (Var p : parts) {
        const Eigen::Index r = t.value(p).rows();
        t.accumulate(p, g.middleRows(at, r));
        at += r;
      }
    };
  return out;
}

Var Tape::slice_rows(Var a, int start, int rows) {
  check(a);
  if (start < 0 || rows < 1 || start + rows > value(a).rows())
    throw Error("slice_rows: out of range");
  Var out = emplace(value(a).middleRows(start, rows), needs(a), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, start, out](Tape& t) {
      t.accumulate_rows(a, start, t.grad_ref(out));
    };
  return out;
}

Var Tape::embedding_rows(Var table, const std::vector<int>& ids) {
  check(table);
  const Eigen::Index n = value(table).rows();
  Eigen::MatrixXd v(static_cast<Eigen::Index>(ids.size()), value(table).cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 1 || ids[i] > n)
      throw Error("embedding_rows: id " + std::to_string(ids[i]) +
                  " out of range 1.." + std::to_string(n));
    v.row(static_cast<Eigen::Index>(i)) = value(table).row(ids[i] - 1);
  }
  Var out = emplace(std::move(v), needs(table), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [table, ids, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad_ref(out);
      Eigen::MatrixXd gt =
          Eigen::MatrixXd::Zero(t.value(table).rows(), t.value(table).cols());
      for (std::size_t i = 0; i < ids.size(); ++i)
        gt.row(ids[i] - 1) += g.row(static_cast<Eigen::Index>(i));
      t.accumulate(table, gt);
    };
  return out;
}

Var Tape::softmax_rows(Var a) {
  check(a);
  Eigen::MatrixXd v = value(a);
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double m = v.row(r).maxCoeff();
    v.row(r) = (v.row(r).array() - m).exp();
    v.row(r) /= v.row(r).sum();
  }
  Var out = emplace(std::move(v), needs(a), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad_ref(out);
      const Eigen::MatrixXd& s = t.value(out);
      Eigen::MatrixXd ga(s.rows(), s.cols());
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double dot = g.row(r).dot(s.row(r));
        ga.row(r) = (g.row(r).array() - dot) * s.row(r).array();
      }
      t.accumulate(a, ga);
    };
  return out;
}

Var Tape::layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  check(x);
  check(gamma);
  check(beta);
  const Eigen::MatrixXd& xv = value(x);
  if (value(gamma).rows() != 1 || value(gamma).cols() != xv.cols() ||
      value(beta).rows() != 1 || value(beta).cols() != xv.cols())
    throw Error("layer_norm_rows: gamma/beta must be 1 x cols(x)");
  Eigen::MatrixXd xhat(xv.rows(), xv.cols());
  Eigen::VectorXd inv_sigma(xv.rows());
  Eigen::MatrixXd v(xv.rows(), xv.cols());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_sigma[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = ((xv.row(r).array() - mu) * inv_sigma[r]).matrix();
    v.row(r) = xhat.row(r).cwiseProduct(value(gamma).row(0)) + value(beta).row(0);
  }
  Var out =
      emplace(std::move(v), needs(x) || needs(gamma) || needs(beta), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [x, gamma, beta, xhat, inv_sigma,
                                  out](Tape& t) {
      const Eigen::MatrixXd& g = t.grad_ref(out);
      t.accumulate(beta, g.colwise().sum());
      Eigen::MatrixXd ggamma(1, g.cols());
      ggamma.row(0) = (g.array() * xhat.array()).colwise().sum().matrix();
      t.accumulate(gamma, ggamma);
      Eigen::MatrixXd gx(g.rows(), g.cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const Eigen::RowVectorXd gy =
            g.row(r).cwiseProduct(t.value(gamma).row(0));  // dL/dxhat
        const double mean_gy = gy.mean();
        const double mean_gy_xhat = gy.cwiseProduct(xhat.row(r)).mean();
        gx.row(r) = (inv_sigma[r] *
                     (gy.array() - mean_gy - xhat.row(r).array() * mean_gy_xhat))
                        .matrix();
      }
      t.accumulate(x, gx);
    };
  return out;
}

Var Tape::relu(Var a) {
  check(a);
  Var out = emplace(value(a).cwiseMax(0.0), needs(a), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, out](Tape& t) {
      const Eigen::MatrixXd mask =
          (t.value(a).array() > 0.0).cast<double>().matrix();
      t.accumulate(a, t.grad_ref(out).cwiseProduct(mask));
    };
  return out;
}

Var Tape::sigmoid(Var a) {
  check(a);
  Eigen::MatrixXd v = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
  Var out = emplace(std::move(v), needs(a), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, out](Tape& t) {
      const auto& y = t.value(out).array();
      t.accumulate(a,
                   (t.grad_ref(out).array() * y * (1.0 - y)).matrix());
    };
  return out;
}

Var Tape::tanh(Var a) {
  check(a);
  Var out = emplace(value(a).array().tanh().matrix(), needs(a), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, out](Tape& t) {
      const auto& y = t.value(out).array();
      t.accumulate(a, (t.grad_ref(out).array() * (1.0 - y * y)).matrix());
    };
  return out;
}

Var Tape::dropout(Var a, double rate, std::mt19937_64& rng) {
  check(a);
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout: rate must be in [0,1)");
  if (rate == 0.0) return a;
  Eigen::MatrixXd mask(value(a).rows(), value(a).cols());
  std::bernoulli_distribution keep(1.0 - rate);
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
      mask(r, c) = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  Var out = emplace(value(a).cwiseProduct(mask), needs(a), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, mask, out](Tape& t) {
      t.accumulate(a, t.grad_ref(out).cwiseProduct(mask));
    };
  return out;
}

Var Tape::sum(Var a) {
  check(a);
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = value(a).sum();
  Var out = emplace(std::move(v), needs(a), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [a, out](Tape& t) {
      t.accumulate(a, Eigen::MatrixXd::Constant(t.value(a).rows(),
                                                t.value(a).cols(),
                                                t.grad_ref(out)(0, 0)));
    };
  return out;
}

Var Tape::rmse_column(Var pred, const Eigen::VectorXd& target) {
  check(pred);
  if (value(pred).cols() != 1 || value(pred).rows() != target.size())
    throw Error("rmse_column: pred must be B x 1 matching target");
  if (target.size() == 0) throw Error("rmse_column: empty batch");
  const Eigen::VectorXd diff = value(pred).col(0) - target;
  const double b = static_cast<double>(target.size());
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = std::sqrt(diff.squaredNorm() / b);
  Var out = emplace(std::move(v), needs(pred), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [pred, diff, b, out](Tape& t) {
      const double r = t.value(out)(0, 0);
      if (r == 0.0) return;  // flat at the optimum; use subgradient 0
      t.accumulate(pred, (t.grad_ref(out)(0, 0) / (b * r)) * diff);
    };
  return out;
}

Var Tape::weighted_cross_entropy(Var logits, const std::vector<int>& targets,
                                 const Eigen::VectorXd& class_weights) {
  check(logits);
  const Eigen::MatrixXd& lv = value(logits);
  if (lv.rows() != static_cast<Eigen::Index>(targets.size()))
    throw Error("weighted_cross_entropy: batch size mismatch");
  if (lv.rows() == 0) throw Error("weighted_cross_entropy: empty batch");
  if (class_weights.size() != lv.cols())
    throw Error("weighted_cross_entropy: weight vector length mismatch");
  double weight_sum = 0.0, loss = 0.0;
  for (Eigen::Index r = 0; r < lv.rows(); ++r) {
    const int y = targets[static_cast<std::size_t>(r)];
    if (y < 1 || y > lv.cols())
      throw Error("weighted_cross_entropy: target out of range");
    const double w = class_weights[y - 1];
    const double m = lv.row(r).maxCoeff();
    const double lse = m + std::log((lv.row(r).array() - m).exp().sum());
    loss += w * (lse - lv(r, y - 1));
    weight_sum += w;
  }
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = loss / weight_sum;
  Var out = emplace(std::move(v), needs(logits), {});
  if (nodes_[out.index].requires_grad)
    nodes_[out.index].backprop = [logits, targets, class_weights, weight_sum,
                                  out](Tape& t) {
      const double gscale = t.grad_ref(out)(0, 0) / weight_sum;
      const Eigen::MatrixXd& lv = t.value(logits);
      Eigen::MatrixXd gl(lv.rows(), lv.cols());
      for (Eigen::Index r = 0; r < lv.rows(); ++r) {
        const int y = targets[static_cast<std::size_t>(r)];
        const double w = class_weights[y - 1];
        const double m = lv.row(r).maxCoeff();
        Eigen::RowVectorXd p = (lv.row(r).array() - m).exp();
        p /= p.sum();
        p[y - 1] -= 1.0;
        gl.row(r) = (w * gscale) * p;
      }
      t.accumulate(logits, gl);
    };
  return out;
}

void Tape::backward(Var root) {
  check(root);
  if (value(root).rows() != 1 || value(root).cols() != 1)
    throw Error("backward: root must be a 1x1 scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[root.index].grad = Eigen::MatrixXd::Ones(1, 1);
  for (int i = root.index; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() != 0 && n.backprop) n.backprop(*this);
  }
}

}  // namespace nmstpp::ad
