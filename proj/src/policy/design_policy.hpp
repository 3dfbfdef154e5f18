#pragma once

#include <cmath>
#include <vector>

#include "graph/corridor_graph.hpp"
#include "nn/layers.hpp"

namespace decor {

inline const double kDesignSigma = std::exp(-2.5);

// Equal-weight isotropic mixture over normalized (location, width).
struct GmmParams {
  nn::Mat means;  // M x 2 in [0, 1]
  double sigma = kDesignSigma;
  int components() const { return static_cast<int>(means.rows()); }
};

struct DesignAction {
  nn::Mat raw;  // M x 2, one draw per component, before clamping
  std::vector<CrosswalkProposal> proposals;  // clamped, denormalized, merged
};

CrosswalkProposal denormalize(const CorridorSpec& spec, double u, double v);
Eigen::RowVector2d normalize(const CorridorSpec& spec, const CrosswalkProposal& p);

// Repeatedly merges the closest pair closer than min_sep (ties: lower
// location first) into its mean location and width. Output sorted by location.
std::vector<CrosswalkProposal> merge_proposals(std::vector<CrosswalkProposal> raw,
                                               double min_sep = kMinCrosswalkSeparationM);

DesignAction sample_proposals(const GmmParams& gmm, const CorridorSpec& spec, Rng& rng);

struct ModeOptions {
  int max_iterations = 500;
  double tolerance = 1e-12;
  double dedup_radius = 1e-3;
};

struct ModeResult {
  std::vector<Eigen::RowVector2d> modes;  // normalized
  int fallbacks = 0;  // starts that did not converge
};

ModeResult find_modes(const GmmParams& gmm, const ModeOptions& opt = {});
// Modes denormalized and merged.
std::vector<CrosswalkProposal> extract_modes(const GmmParams& gmm, const CorridorSpec& spec,
                                             const ModeOptions& opt = {});

double gmm_density(const GmmParams& gmm, const Eigen::RowVector2d& x);

// Sum over components of the draw's log-density under its own component.
double design_log_prob(const GmmParams& gmm, const nn::Mat& raw);
nn::Var design_log_prob(nn::Var means, double sigma, const nn::Mat& raw);

struct DesignPolicyConfig {
  int components = 7;
  nn::GraphEncoderConfig encoder;
  std::vector<int> shared = {512, 256};
  std::vector<int> actor = {256, 128, 64};
  std::vector<int> critic = {256, 128, 64};
  double sigma = kDesignSigma;
};

class DesignPolicy {
 public:
  DesignPolicy(const DesignPolicyConfig& cfg, std::uint64_t seed);

  struct Forward {
    nn::Var means;  // M x 2 squashed
    nn::Var value;  // 1 x 1
  };
  Forward forward(nn::Tape& t, const nn::GraphInput& g) const;
  // Convenience evaluation without keeping the tape.
  std::pair<GmmParams, double> evaluate(const nn::GraphInput& g) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const DesignPolicyConfig& config() const { return cfg_; }

 private:
  DesignPolicyConfig cfg_;
  nn::ParamStore params_;
  nn::GraphEncoder encoder_;
  nn::Mlp shared_;
  nn::Mlp actor_;
  nn::Mlp critic_;
};

}  // namespace decor
