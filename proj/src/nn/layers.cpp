#include "nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace decor::nn {

Parameter& ParamStore::add(const std::string& name, int rows, int cols, Rng& rng, double gain) {
  if (index_.count(name)) throw Error(ErrorKind::kContract, "duplicate parameter " + name);
  Parameter p;
  p.name = name;
  p.value = Mat::Zero(rows, cols);
  p.grad = Mat::Zero(rows, cols);
  if (gain != 0.0) {
    const double a = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-a, a);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value(i) = u(rng);
  }
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::kContract, "no parameter " + name);
  return params_[it->second];
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::kContract, "no parameter " + name);
  return params_[it->second];
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : params_) {
    std::vector<double> data(p.value.data(), p.value.data() + p.value.size());
    arr.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"data", data}});
  }
  return arr;
}

void ParamStore::from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != params_.size())
    throw Error(ErrorKind::kValidation, "checkpoint parameter count mismatch");
  for (const auto& e : j) {
    Parameter& p = get(e.at("name").get<std::string>());
    const auto rows = e.at("rows").get<Eigen::Index>();
    const auto cols = e.at("cols").get<Eigen::Index>();
    const auto data = e.at("data").get<std::vector<double>>();
    if (rows != p.value.rows() || cols != p.value.cols() ||
        static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw Error(ErrorKind::kValidation, "checkpoint shape mismatch for " + p.name);
    std::copy(data.begin(), data.end(), p.value.data());
  }
}

void ParamStore::copy_values_from(const ParamStore& other) {
  for (auto& p : params_) {
    const Parameter& q = other.get(p.name);
    if (q.value.rows() != p.value.rows() || q.value.cols() != p.value.cols())
      throw Error(ErrorKind::kValidation, "shape mismatch copying " + p.name);
    p.value = q.value;
  }
}

Dense::Dense(ParamStore& ps, const std::string& name, int in, int out, bool tanh_act, Rng& rng,
             double gain)
    : w(&ps.add(name + ".w", in, out, rng, gain)),
      b(&ps.add(name + ".b", 1, out, rng, 0.0)),
      activate(tanh_act) {}

Var Dense::forward(Tape& t, Var x) const {
  Var y = add_row(matmul(x, t.param(*w)), t.param(*b));
  return activate ? tanh(y) : y;
}

Mlp::Mlp(ParamStore& ps, const std::string& name, int in, const std::vector<int>& hidden, int out,
         Rng& rng, double out_gain) {
  int prev = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    layers.emplace_back(ps, name + "." + std::to_string(i), prev, hidden[i], true, rng);
    prev = hidden[i];
  }
  if (out > 0) layers.emplace_back(ps, name + ".out", prev, out, false, rng, out_gain);
}

Var Mlp::forward(Tape& t, Var x) const {
  for (const auto& l : layers) x = l.forward(t, x);
  return x;
}

GraphInput make_graph_input(const Mat& node_features, const std::vector<std::pair<int, int>>& edges,
                            const Mat& edge_features) {
  GraphInput g;
  g.n = static_cast<int>(node_features.rows());
  g.node_features = node_features;
  const Eigen::Index fe = edge_features.cols();
  g.edge_features = Mat::Zero(static_cast<Eigen::Index>(edges.size()) + g.n, fe);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [s, d] = edges[e];
    if (s < 0 || s >= g.n || d < 0 || d >= g.n)
      throw Error(ErrorKind::kValidation, "edge index out of range");
    g.src.push_back(s);
    g.dst.push_back(d);
    g.edge_features.row(static_cast<Eigen::Index>(e)) = edge_features.row(static_cast<Eigen::Index>(e));
  }
  for (int v = 0; v < g.n; ++v) {  // self loops carry zero edge features
    g.src.push_back(v);
    g.dst.push_back(v);
  }
  return g;
}

GraphInput make_graph_input(const FeatureMatrices& fm) {
  return make_graph_input(fm.node_features, fm.edge_index, fm.edge_features);
}

GatLayer::GatLayer(ParamStore& ps, const std::string& name, int in, int edge_dim, int h, int d,
                   Rng& rng)
    : heads(h), dim(d) {
  w_src = &ps.add(name + ".w_src", in, h * d, rng);
  w_dst = &ps.add(name + ".w_dst", in, h * d, rng);
  w_edge = &ps.add(name + ".w_edge", edge_dim, h * d, rng);
  att = &ps.add(name + ".att", 1, h * d, rng);
  bias = &ps.add(name + ".bias", 1, h * d, rng, 0.0);
}

Var GatLayer::forward(Tape& t, Var x, const GraphInput& g, Mat* alpha_out) const {
  Var xs = matmul(x, t.param(*w_src));
  Var xd = matmul(x, t.param(*w_dst));
  Var ef = matmul(t.constant(g.edge_features), t.param(*w_edge));
  Var msg = gather_rows(xs, g.src);
  Var z = add(add(msg, gather_rows(xd, g.dst)), ef);
  Var score = group_sum_cols(mul_row(leaky_relu(z, slope), t.param(*att)), dim);  // E x H
  Var alpha = segment_softmax(score, g.dst, g.n);
  if (alpha_out) *alpha_out = alpha.value();
  Var out = scatter_add_rows(group_scale_cols(msg, alpha), g.dst, g.n);
  return add_row(out, t.param(*bias));
}

std::vector<int> sort_pool_order(const Mat& emb, int k) {
  std::vector<int> ids(static_cast<std::size_t>(emb.rows()));
  std::iota(ids.begin(), ids.end(), 0);
  const Eigen::VectorXd m = emb.rowwise().mean();
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return m(a) > m(b); });
  ids.resize(static_cast<std::size_t>(k), -1);
  return ids;
}

Var sort_pool(Var emb, int k) {
  return flatten(gather_rows(emb, sort_pool_order(emb.value(), k)));
}

GraphEncoder::GraphEncoder(ParamStore& ps, const std::string& name, int node_dim, int edge_dim,
                           const GraphEncoderConfig& c, Rng& rng)
    : cfg(c),
      l1(ps, name + ".gat1", node_dim, edge_dim, c.heads1, c.hidden, rng),
      l2(ps, name + ".gat2", c.heads1 * c.hidden, edge_dim, c.heads2, c.out, rng) {}

Var GraphEncoder::forward(Tape& t, const GraphInput& g) const {
  Var h = tanh(l1.forward(t, t.constant(g.node_features), g));
  h = tanh(l2.forward(t, h, g));
  return sort_pool(h, cfg.sort_k);
}

}  // namespace decor::nn
