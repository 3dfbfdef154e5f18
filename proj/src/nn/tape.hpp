#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace decor::nn {

using Mat = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
};

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

// Reverse-mode recorder. Ops append nodes; backward() walks them in reverse
// and accumulates into Parameter::grad for parameter leaves.
class Tape {
 public:
  Var constant(Mat v);
  Var param(Parameter& p);
  Var record(Mat v, std::vector<int> inputs, std::function<void(Tape&, int)> back);

  void backward(Var out);
  void clear();

  const Mat& value(int id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }
  const Mat& grad(int id) const { return nodes_[id].grad; }
  // Grad accumulator of an input; allocated on first touch.
  Mat& grad_of(int id);
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    Parameter* param = nullptr;
    std::function<void(Tape&, int)> back;
  };
  std::vector<Node> nodes_;
};

// Elementwise and linear algebra.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var a, Var row);  // a (n x m) + row (1 x m) broadcast
Var sub_row(Var a, Var row);
Var mul_row(Var a, Var row);
Var mul_col(Var a, Var col);  // a (n x m) * col (n x 1) broadcast
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

Var tanh(Var a);
Var leaky_relu(Var a, double slope);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var clamp(Var a, double lo, double hi);  // zero gradient outside
Var minimum(Var a, Var b);

// Reductions.
Var sum(Var a);       // 1 x 1
Var mean(Var a);      // 1 x 1
Var row_sum(Var a);   // n x 1
Var col_sum(Var a);   // 1 x m
Var logsumexp(Var a);           // over all entries, 1 x 1
Var logsumexp_rows(Var a);      // n x 1
Var log_softmax_rows(Var a);

// Shape and indexing.
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, int start, int count);
Var slice_rows(Var a, int start, int count);
Var flatten(Var a);  // row-major to 1 x (n*m)
Var reshape_rows(Var a, int rows);  // 1 x (rows*m) row-major back to rows x m
// out row r = a row idx[r]; idx -1 yields a zero row.
Var gather_rows(Var a, const std::vector<int>& idx);
// out (n x m), out row idx[r] += a row r.
Var scatter_add_rows(Var a, const std::vector<int>& idx, int n);
// out(r, c) = a(r, idx[r]); n x 1.
Var pick(Var a, const std::vector<int>& idx);
// Sums consecutive column groups of width `group`: n x (m / group).
Var group_sum_cols(Var a, int group);
// Scales consecutive column groups of a (n x H*D) by w (n x H).
Var group_scale_cols(Var a, Var w);
// Softmax of each column over the rows sharing a segment id.
Var segment_softmax(Var scores, const std::vector<int>& segment, int n_segments);

}  // namespace decor::nn
