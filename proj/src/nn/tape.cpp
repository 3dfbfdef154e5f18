#include "nn/tape.hpp"

#include <cmath>
#include <limits>

#include "common/error.hpp"

namespace decor::nn {

const Mat& Var::value() const { return tape->value(id); }
const Mat& Var::grad() const { return tape->grad(id); }

Var Tape::constant(Mat v) {
  Node n;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Parameter& p) {
  Node n;  // reads p.value in place; parameters must not change while taped
  n.needs_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Mat v, std::vector<int> inputs, std::function<void(Tape&, int)> back) {
  Node n;
  n.value = std::move(v);
  for (int i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
  if (n.needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Mat& Tape::grad_of(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(value(id).rows(), value(id).cols());
  return n.grad;
}

void Tape::backward(Var out) {
  if (out.tape != this) throw Error(ErrorKind::kContract, "variable from another tape");
  grad_of(out.id).setOnes();
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.needs_grad) continue;
    if (n.param) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols())
        n.param->grad = Mat::Zero(n.grad.rows(), n.grad.cols());
      n.param->grad += n.grad;
    } else if (n.back) {
      n.back(*this, i);
    }
  }
}

void Tape::clear() { nodes_.clear(); }

namespace {

void check_same(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::kValidation, std::string(op) + ": shape mismatch");
}

Tape& tape_of(const Var& a) { return *a.tape; }

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::kValidation, "matmul: shape mismatch");
  const int ia = a.id, ib = b.id;
  return tape_of(a).record(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_of(ia).noalias() += g * t.value(ib).transpose();
    if (t.needs_grad(ib)) t.grad_of(ib).noalias() += t.value(ia).transpose() * g;
  });
}

Var add(Var a, Var b) {
  check_same(a, b, "add");
  const int ia = a.id, ib = b.id;
  return tape_of(a).record(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    if (t.needs_grad(ia)) t.grad_of(ia) += t.grad(self);
    if (t.needs_grad(ib)) t.grad_of(ib) += t.grad(self);
  });
}

Var sub(Var a, Var b) {
  check_same(a, b, "sub");
  const int ia = a.id, ib = b.id;
  return tape_of(a).record(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    if (t.needs_grad(ia)) t.grad_of(ia) += t.grad(self);
    if (t.needs_grad(ib)) t.grad_of(ib) -= t.grad(self);
  });
}

Var mul(Var a, Var b) {
  check_same(a, b, "mul");
  const int ia = a.id, ib = b.id;
  return tape_of(a).record(a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_of(ia) += g.cwiseProduct(t.value(ib));
    if (t.needs_grad(ib)) t.grad_of(ib) += g.cwiseProduct(t.value(ia));
  });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw Error(ErrorKind::kValidation, "add_row: shape mismatch");
  const int ia = a.id, ir = row.id;
  Mat v = a.value().rowwise() + row.value().row(0);
  return tape_of(a).record(std::move(v), {ia, ir}, [ia, ir](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_of(ia) += g;
    if (t.needs_grad(ir)) t.grad_of(ir) += g.colwise().sum();
  });
}

Var sub_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw Error(ErrorKind::kValidation, "sub_row: shape mismatch");
  const int ia = a.id, ir = row.id;
  Mat v = a.value().rowwise() - row.value().row(0);
  return tape_of(a).record(std::move(v), {ia, ir}, [ia, ir](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_of(ia) += g;
    if (t.needs_grad(ir)) t.grad_of(ir) -= g.colwise().sum();
  });
}

Var mul_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw Error(ErrorKind::kValidation, "mul_row: shape mismatch");
  const int ia = a.id, ir = row.id;
  Mat v = a.value().array().rowwise() * row.value().row(0).array();
  return tape_of(a).record(std::move(v), {ia, ir}, [ia, ir](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia))
      t.grad_of(ia).array() += g.array().rowwise() * t.value(ir).row(0).array();
    if (t.needs_grad(ir)) t.grad_of(ir) += g.cwiseProduct(t.value(ia)).colwise().sum();
  });
}

Var mul_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows())
    throw Error(ErrorKind::kValidation, "mul_col: shape mismatch");
  const int ia = a.id, ic = col.id;
  Mat v = a.value().array().colwise() * col.value().col(0).array();
  return tape_of(a).record(std::move(v), {ia, ic}, [ia, ic](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia))
      t.grad_of(ia).array() += g.array().colwise() * t.value(ic).col(0).array();
    if (t.needs_grad(ic)) t.grad_of(ic) += g.cwiseProduct(t.value(ia)).rowwise().sum();
  });
}

Var scale(Var a, double s) {
  const int ia = a.id;
  return tape_of(a).record(a.value() * s, {ia}, [ia, s](Tape& t, int self) {
    t.grad_of(ia) += t.grad(self) * s;
  });
}

Var add_scalar(Var a, double s) {
  const int ia = a.id;
  return tape_of(a).record(a.value().array() + s, {ia}, [ia](Tape& t, int self) {
    t.grad_of(ia) += t.grad(self);
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var tanh(Var a) {
  const int ia = a.id;
  Mat v = a.value().array().tanh();
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    const Mat& y = t.value(self);
    t.grad_of(ia).array() += t.grad(self).array() * (1.0 - y.array().square());
  });
}

Var leaky_relu(Var a, double slope) {
  const int ia = a.id;
  Mat v = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return tape_of(a).record(std::move(v), {ia}, [ia, slope](Tape& t, int self) {
    const Mat d = t.value(ia).unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
    t.grad_of(ia) += t.grad(self).cwiseProduct(d);
  });
}

Var exp(Var a) {
  const int ia = a.id;
  Mat v = a.value().array().exp();
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    t.grad_of(ia) += t.grad(self).cwiseProduct(t.value(self));
  });
}

Var log(Var a) {
  const int ia = a.id;
  Mat v = a.value().array().log();
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    t.grad_of(ia).array() += t.grad(self).array() / t.value(ia).array();
  });
}

Var square(Var a) {
  const int ia = a.id;
  Mat v = a.value().array().square();
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    t.grad_of(ia).array() += 2.0 * t.grad(self).array() * t.value(ia).array();
  });
}

namespace {
double sigmoid_of(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
double softplus_of(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
}  // namespace

Var sigmoid(Var a) {
  const int ia = a.id;
  Mat v = a.value().unaryExpr(&sigmoid_of);
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    const Mat& y = t.value(self);
    t.grad_of(ia).array() += t.grad(self).array() * y.array() * (1.0 - y.array());
  });
}

Var softplus(Var a) {
  const int ia = a.id;
  Mat v = a.value().unaryExpr(&softplus_of);
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    t.grad_of(ia).array() += t.grad(self).array() * t.value(ia).unaryExpr(&sigmoid_of).array();
  });
}

Var clamp(Var a, double lo, double hi) {
  const int ia = a.id;
  Mat v = a.value().cwiseMax(lo).cwiseMin(hi);
  return tape_of(a).record(std::move(v), {ia}, [ia, lo, hi](Tape& t, int self) {
    const Mat& x = t.value(ia);
    const Mat& g = t.grad(self);
    Mat& ga = t.grad_of(ia);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x(i) >= lo && x(i) <= hi) ga(i) += g(i);
  });
}

Var minimum(Var a, Var b) {
  check_same(a, b, "minimum");
  const int ia = a.id, ib = b.id;
  Mat v = a.value().cwiseMin(b.value());
  return tape_of(a).record(std::move(v), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Mat& x = t.value(ia);
    const Mat& y = t.value(ib);
    const Mat& g = t.grad(self);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      // ties go to the first argument
      if (x(i) <= y(i)) {
        if (t.needs_grad(ia)) t.grad_of(ia)(i) += g(i);
      } else if (t.needs_grad(ib)) {
        t.grad_of(ib)(i) += g(i);
      }
    }
  });
}

Var sum(Var a) {
  const int ia = a.id;
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    t.grad_of(ia).array() += t.grad(self)(0, 0);
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var row_sum(Var a) {
  const int ia = a.id;
  Mat v = a.value().rowwise().sum();
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    t.grad_of(ia).colwise() += t.grad(self).col(0);
  });
}

Var col_sum(Var a) {
  const int ia = a.id;
  Mat v = a.value().colwise().sum();
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    t.grad_of(ia).rowwise() += t.grad(self).row(0);
  });
}

Var logsumexp(Var a) {
  const int ia = a.id;
  const double m = a.value().maxCoeff();
  Mat v(1, 1);
  v(0, 0) = m + std::log((a.value().array() - m).exp().sum());
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    const double lse = t.value(self)(0, 0);
    t.grad_of(ia).array() += t.grad(self)(0, 0) * (t.value(ia).array() - lse).exp();
  });
}

Var logsumexp_rows(Var a) {
  const int ia = a.id;
  const Mat& x = a.value();
  Mat v(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    v(r, 0) = m + std::log((x.row(r).array() - m).exp().sum());
  }
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    const Mat& x = t.value(ia);
    const Mat& y = t.value(self);
    const Mat& g = t.grad(self);
    Mat& ga = t.grad_of(ia);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      ga.row(r).array() += g(r, 0) * (x.row(r).array() - y(r, 0)).exp();
  });
}

Var log_softmax_rows(Var a) {
  const int ia = a.id;
  const Mat& x = a.value();
  Mat v(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    v.row(r) = x.row(r).array() - lse;
  }
  return tape_of(a).record(std::move(v), {ia}, [ia](Tape& t, int self) {
    const Mat& y = t.value(self);
    const Mat& g = t.grad(self);
    Mat& ga = t.grad_of(ia);
    for (Eigen::Index r = 0; r < y.rows(); ++r)
      ga.row(r).array() += g.row(r).array() - y.row(r).array().exp() * g.row(r).sum();
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorKind::kValidation, "concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw Error(ErrorKind::kValidation, "concat_cols: row mismatch");
    spans.emplace_back(cols, p.cols());
    cols += p.cols();
    ids.push_back(p.id);
  }
  Mat v(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i)
    v.middleCols(spans[i].first, spans[i].second) = parts[i].value();
  return parts[0].tape->record(std::move(v), ids, [ids, spans](Tape& t, int self) {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (t.needs_grad(ids[i]))
        t.grad_of(ids[i]) += t.grad(self).middleCols(spans[i].first, spans[i].second);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorKind::kValidation, "concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw Error(ErrorKind::kValidation, "concat_rows: column mismatch");
    spans.emplace_back(rows, p.rows());
    rows += p.rows();
    ids.push_back(p.id);
  }
  Mat v(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i)
    v.middleRows(spans[i].first, spans[i].second) = parts[i].value();
  return parts[0].tape->record(std::move(v), ids, [ids, spans](Tape& t, int self) {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (t.needs_grad(ids[i]))
        t.grad_of(ids[i]) += t.grad(self).middleRows(spans[i].first, spans[i].second);
  });
}

Var slice_cols(Var a, int start, int count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw Error(ErrorKind::kValidation, "slice_cols: out of range");
  const int ia = a.id;
  return tape_of(a).record(a.value().middleCols(start, count), {ia},
                           [ia, start, count](Tape& t, int self) {
                             t.grad_of(ia).middleCols(start, count) += t.grad(self);
                           });
}

Var slice_rows(Var a, int start, int count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw Error(ErrorKind::kValidation, "slice_rows: out of range");
  const int ia = a.id;
  return tape_of(a).record(a.value().middleRows(start, count), {ia},
                           [ia, start, count](Tape& t, int self) {
                             t.grad_of(ia).middleRows(start, count) += t.grad(self);
                           });
}

Var flatten(Var a) {
  const int ia = a.id;
  const Eigen::Index r = a.rows(), c = a.cols();
  Mat v(1, r * c);
  for (Eigen::Index i = 0; i < r; ++i) v.block(0, i * c, 1, c) = a.value().row(i);
  return tape_of(a).record(std::move(v), {ia}, [ia, r, c](Tape& t, int self) {
    Mat& ga = t.grad_of(ia);
    for (Eigen::Index i = 0; i < r; ++i) ga.row(i) += t.grad(self).block(0, i * c, 1, c);
  });
}

Var reshape_rows(Var a, int rows) {
  if (a.rows() != 1 || rows <= 0 || a.cols() % rows != 0)
    throw Error(ErrorKind::kValidation, "reshape_rows: bad shape");
  const int ia = a.id;
  const Eigen::Index c = a.cols() / rows;
  Mat v(rows, c);
  for (int i = 0; i < rows; ++i) v.row(i) = a.value().block(0, i * c, 1, c);
  return tape_of(a).record(std::move(v), {ia}, [ia, rows, c](Tape& t, int self) {
    Mat& ga = t.grad_of(ia);
    for (int i = 0; i < rows; ++i) ga.block(0, i * c, 1, c) += t.grad(self).row(i);
  });
}

Var gather_rows(Var a, const std::vector<int>& idx) {
  const int ia = a.id;
  Mat v = Mat::Zero(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= a.rows()) throw Error(ErrorKind::kValidation, "gather_rows: index out of range");
    if (idx[r] >= 0) v.row(r) = a.value().row(idx[r]);
  }
  return tape_of(a).record(std::move(v), {ia}, [ia, idx](Tape& t, int self) {
    Mat& ga = t.grad_of(ia);
    const Mat& g = t.grad(self);
    for (std::size_t r = 0; r < idx.size(); ++r)
      if (idx[r] >= 0) ga.row(idx[r]) += g.row(r);
  });
}

Var scatter_add_rows(Var a, const std::vector<int>& idx, int n) {
  if (static_cast<Eigen::Index>(idx.size()) != a.rows())
    throw Error(ErrorKind::kValidation, "scatter_add_rows: index count mismatch");
  const int ia = a.id;
  Mat v = Mat::Zero(n, a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= n) throw Error(ErrorKind::kValidation, "scatter_add_rows: bad index");
    v.row(idx[r]) += a.value().row(r);
  }
  return tape_of(a).record(std::move(v), {ia}, [ia, idx](Tape& t, int self) {
    Mat& ga = t.grad_of(ia);
    const Mat& g = t.grad(self);
    for (std::size_t r = 0; r < idx.size(); ++r) ga.row(r) += g.row(idx[r]);
  });
}

Var pick(Var a, const std::vector<int>& idx) {
  if (static_cast<Eigen::Index>(idx.size()) != a.rows())
    throw Error(ErrorKind::kValidation, "pick: index count mismatch");
  const int ia = a.id;
  Mat v(a.rows(), 1);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= a.cols()) throw Error(ErrorKind::kValidation, "pick: bad index");
    v(r, 0) = a.value()(r, idx[r]);
  }
  return tape_of(a).record(std::move(v), {ia}, [ia, idx](Tape& t, int self) {
    Mat& ga = t.grad_of(ia);
    for (std::size_t r = 0; r < idx.size(); ++r) ga(r, idx[r]) += t.grad(self)(r, 0);
  });
}

Var group_sum_cols(Var a, int group) {
  if (group <= 0 || a.cols() % group != 0)
    throw Error(ErrorKind::kValidation, "group_sum_cols: bad group width");
  const int ia = a.id;
  const Eigen::Index h = a.cols() / group;
  Mat v(a.rows(), h);
  for (Eigen::Index k = 0; k < h; ++k) v.col(k) = a.value().middleCols(k * group, group).rowwise().sum();
  return tape_of(a).record(std::move(v), {ia}, [ia, group, h](Tape& t, int self) {
    Mat& ga = t.grad_of(ia);
    for (Eigen::Index k = 0; k < h; ++k) ga.middleCols(k * group, group).colwise() += t.grad(self).col(k);
  });
}

Var group_scale_cols(Var a, Var w) {
  if (w.rows() != a.rows() || w.cols() == 0 || a.cols() % w.cols() != 0)
    throw Error(ErrorKind::kValidation, "group_scale_cols: shape mismatch");
  const int ia = a.id, iw = w.id;
  const Eigen::Index h = w.cols(), d = a.cols() / w.cols();
  Mat v(a.rows(), a.cols());
  for (Eigen::Index k = 0; k < h; ++k)
    v.middleCols(k * d, d) = a.value().middleCols(k * d, d).array().colwise() * w.value().col(k).array();
  return tape_of(a).record(std::move(v), {ia, iw}, [ia, iw, h, d](Tape& t, int self) {
    const Mat& g = t.grad(self);
    for (Eigen::Index k = 0; k < h; ++k) {
      if (t.needs_grad(ia))
        t.grad_of(ia).middleCols(k * d, d).array() +=
            g.middleCols(k * d, d).array().colwise() * t.value(iw).col(k).array();
      if (t.needs_grad(iw))
        t.grad_of(iw).col(k) +=
            g.middleCols(k * d, d).cwiseProduct(t.value(ia).middleCols(k * d, d)).rowwise().sum();
    }
  });
}

Var segment_softmax(Var scores, const std::vector<int>& segment, int n_segments) {
  const Mat& s = scores.value();
  if (static_cast<Eigen::Index>(segment.size()) != s.rows())
    throw Error(ErrorKind::kValidation, "segment_softmax: segment count mismatch");
  const int is = scores.id;
  Mat mx = Mat::Constant(n_segments, s.cols(), -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < segment.size(); ++r) {
    if (segment[r] < 0 || segment[r] >= n_segments)
      throw Error(ErrorKind::kValidation, "segment_softmax: bad segment");
    mx.row(segment[r]) = mx.row(segment[r]).cwiseMax(s.row(r));
  }
  Mat e(s.rows(), s.cols());
  Mat den = Mat::Zero(n_segments, s.cols());
  for (std::size_t r = 0; r < segment.size(); ++r) {
    e.row(r) = (s.row(r) - mx.row(segment[r])).array().exp();
    den.row(segment[r]) += e.row(r);
  }
  for (std::size_t r = 0; r < segment.size(); ++r) e.row(r).array() /= den.row(segment[r]).array();
  return scores.tape->record(std::move(e), {is}, [is, segment, n_segments](Tape& t, int self) {
    const Mat& y = t.value(self);
    const Mat& g = t.grad(self);
    Mat dot = Mat::Zero(n_segments, y.cols());
    for (std::size_t r = 0; r < segment.size(); ++r)
      dot.row(segment[r]) += g.row(r).cwiseProduct(y.row(r));
    Mat& gs = t.grad_of(is);
    for (std::size_t r = 0; r < segment.size(); ++r)
      gs.row(r).array() += y.row(r).array() * (g.row(r).array() - dot.row(segment[r]).array());
  });
}

}  // namespace decor::nn
