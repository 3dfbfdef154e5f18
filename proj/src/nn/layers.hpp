#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common/rng.hpp"
#include "graph/corridor_graph.hpp"
#include "nn/tape.hpp"

namespace decor::nn {

// Owns named parameters at stable addresses.
class ParamStore {
 public:
  // Glorot-uniform weights times `gain`; use gain 0 for zeros.
  Parameter& add(const std::string& name, int rows, int cols, Rng& rng, double gain = 1.0);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t scalar_count() const;
  void zero_grad();

  nlohmann::json to_json() const;
  // Shapes and names must match the existing parameters.
  void from_json(const nlohmann::json& j);
  void copy_values_from(const ParamStore& other);

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

struct Dense {
  Parameter* w = nullptr;  // in x out
  Parameter* b = nullptr;  // 1 x out
  bool activate = true;

  Dense() = default;
  Dense(ParamStore& ps, const std::string& name, int in, int out, bool tanh_act, Rng& rng,
        double gain = 1.0);
  Var forward(Tape& t, Var x) const;  // x: batch x in
  int in() const { return static_cast<int>(w->value.rows()); }
  int out() const { return static_cast<int>(w->value.cols()); }
};

// tanh hidden layers; the last layer is affine when out > 0.
struct Mlp {
  std::vector<Dense> layers;

  Mlp() = default;
  Mlp(ParamStore& ps, const std::string& name, int in, const std::vector<int>& hidden, int out,
      Rng& rng, double out_gain = 1.0);
  Var forward(Tape& t, Var x) const;
  int out() const { return layers.back().out(); }
};

// Graph in the shape attention consumes: edges j -> i with self loops appended.
struct GraphInput {
  Mat node_features;
  Mat edge_features;
  std::vector<int> src;
  std::vector<int> dst;
  int n = 0;
};

GraphInput make_graph_input(const FeatureMatrices& fm);
GraphInput make_graph_input(const Mat& node_features, const std::vector<std::pair<int, int>>& edges,
                            const Mat& edge_features);

// Dynamic attention layer with edge features in the score input.
struct GatLayer {
  int heads = 1;
  int dim = 1;
  double slope = 0.2;
  Parameter* w_src = nullptr;   // in x H*D
  Parameter* w_dst = nullptr;   // in x H*D
  Parameter* w_edge = nullptr;  // Fe x H*D
  Parameter* att = nullptr;     // 1 x H*D
  Parameter* bias = nullptr;    // 1 x H*D

  GatLayer() = default;
  GatLayer(ParamStore& ps, const std::string& name, int in, int edge_dim, int heads, int dim,
           Rng& rng);
  // Returns n x H*D (heads concatenated). `alpha_out`, if set, receives E x H weights.
  Var forward(Tape& t, Var x, const GraphInput& g, Mat* alpha_out = nullptr) const;
};

// Order used by sort pooling: descending mean activation, ties by node id.
std::vector<int> sort_pool_order(const Mat& emb, int k);
// k x D rows picked by sort_pool_order (zero rows past |V|), flattened to 1 x k*D.
Var sort_pool(Var emb, int k);

struct GraphEncoderConfig {
  int heads1 = 8;
  int heads2 = 1;
  int hidden = 64;
  int out = 64;
  int sort_k = 32;
};

struct GraphEncoder {
  GraphEncoderConfig cfg;
  GatLayer l1;
  GatLayer l2;

  GraphEncoder() = default;
  GraphEncoder(ParamStore& ps, const std::string& name, int node_dim, int edge_dim,
               const GraphEncoderConfig& cfg, Rng& rng);
  Var forward(Tape& t, const GraphInput& g) const;  // 1 x sort_k*out
  int out_size() const { return cfg.sort_k * cfg.out; }
};

}  // namespace decor::nn
