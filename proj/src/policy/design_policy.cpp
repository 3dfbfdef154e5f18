#include "policy/design_policy.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

#include "common/error.hpp"
#include "nn/distributions.hpp"

namespace decor {

CrosswalkProposal denormalize(const CorridorSpec& spec, double u, double v) {
  u = std::clamp(u, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);
  return {spec.loc_min_m + u * (spec.loc_max_m - spec.loc_min_m),
          spec.width_min_m + v * (spec.width_max_m - spec.width_min_m)};
}

Eigen::RowVector2d normalize(const CorridorSpec& spec, const CrosswalkProposal& p) {
  return {(p.location - spec.loc_min_m) / (spec.loc_max_m - spec.loc_min_m),
          (p.width - spec.width_min_m) / (spec.width_max_m - spec.width_min_m)};
}

std::vector<CrosswalkProposal> merge_proposals(std::vector<CrosswalkProposal> raw, double min_sep) {
  for (;;) {
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
      return a.location < b.location || (a.location == b.location && a.width < b.width);
    });
    int best = -1;
    double best_gap = min_sep;
    // after sorting, the closest pair is adjacent; first hit keeps the lower location on ties
    for (std::size_t i = 0; i + 1 < raw.size(); ++i) {
      const double gap = raw[i + 1].location - raw[i].location;
      if (gap < best_gap) {
        best_gap = gap;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) return raw;
    CrosswalkProposal m{(raw[best].location + raw[best + 1].location) / 2.0,
                        (raw[best].width + raw[best + 1].width) / 2.0};
    raw.erase(raw.begin() + best, raw.begin() + best + 2);
    raw.push_back(m);
  }
}

DesignAction sample_proposals(const GmmParams& gmm, const CorridorSpec& spec, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  DesignAction a;
  a.raw = gmm.means;
  std::vector<CrosswalkProposal> props;
  for (int m = 0; m < gmm.components(); ++m) {
    for (int d = 0; d < 2; ++d) a.raw(m, d) += gmm.sigma * n01(rng);
    props.push_back(denormalize(spec, a.raw(m, 0), a.raw(m, 1)));
  }
  a.proposals = merge_proposals(std::move(props));
  return a;
}

double gmm_density(const GmmParams& gmm, const Eigen::RowVector2d& x) {
  const double s2 = gmm.sigma * gmm.sigma;
  double p = 0.0;
  for (int m = 0; m < gmm.components(); ++m)
    p += std::exp(-0.5 * (x - gmm.means.row(m)).squaredNorm() / s2);
  return p / (2.0 * std::numbers::pi * s2 * gmm.components());
}

ModeResult find_modes(const GmmParams& gmm, const ModeOptions& opt) {
  // Mean-shift: a gradient step on log p with step sigma^2, which lands on
  // the responsibility-weighted mean and climbs monotonically.
  ModeResult res;
  const double s2 = gmm.sigma * gmm.sigma;
  for (int start = 0; start < gmm.components(); ++start) {
    Eigen::RowVector2d x = gmm.means.row(start);
    bool converged = false;
    for (int it = 0; it < opt.max_iterations; ++it) {
      Eigen::VectorXd logw(gmm.components());
      for (int m = 0; m < gmm.components(); ++m)
        logw(m) = -0.5 * (x - gmm.means.row(m)).squaredNorm() / s2;
      const Eigen::VectorXd w = (logw.array() - logw.maxCoeff()).exp();
      const Eigen::RowVector2d next = (w.transpose() * gmm.means) / w.sum();
      const double move = (next - x).norm();
      x = next;
      if (move < opt.tolerance) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      ++res.fallbacks;
      x = gmm.means.row(start);
    }
    bool dup = false;
    for (const auto& y : res.modes)
      if ((y - x).norm() < opt.dedup_radius) dup = true;
    if (!dup) res.modes.push_back(x);
  }
  return res;
}

std::vector<CrosswalkProposal> extract_modes(const GmmParams& gmm, const CorridorSpec& spec,
                                             const ModeOptions& opt) {
  std::vector<CrosswalkProposal> out;
  for (const auto& m : find_modes(gmm, opt).modes) out.push_back(denormalize(spec, m(0), m(1)));
  return merge_proposals(std::move(out));
}

double design_log_prob(const GmmParams& gmm, const nn::Mat& raw) {
  if (raw.rows() != gmm.means.rows() || raw.cols() != 2)
    throw Error(ErrorKind::kValidation, "design_log_prob: one draw per component expected");
  double lp = 0.0;
  for (int m = 0; m < gmm.components(); ++m)
    lp += nn::gaussian_log_density(gmm.means.row(m), gmm.sigma, raw.row(m));
  return lp;
}

nn::Var design_log_prob(nn::Var means, double sigma, const nn::Mat& raw) {
  if (raw.rows() != means.rows() || raw.cols() != means.cols())
    throw Error(ErrorKind::kValidation, "design_log_prob: one draw per component expected");
  nn::Tape& t = *means.tape;
  const double m = static_cast<double>(raw.rows());
  const double c = -m * 2.0 * (std::log(sigma) + 0.5 * std::log(2.0 * std::numbers::pi));
  nn::Var sq = nn::sum(nn::square(nn::sub(means, t.constant(raw))));
  return nn::add_scalar(nn::scale(sq, -0.5 / (sigma * sigma)), c);
}

DesignPolicy::DesignPolicy(const DesignPolicyConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  encoder_ = nn::GraphEncoder(params_, "design.enc", 2, 2, cfg.encoder, rng);
  shared_ = nn::Mlp(params_, "design.shared", encoder_.out_size(), cfg.shared, 0, rng);
  const int trunk = cfg.shared.empty() ? encoder_.out_size() : cfg.shared.back();
  actor_ = nn::Mlp(params_, "design.actor", trunk, cfg.actor, 2 * cfg.components, rng, 0.1);
  critic_ = nn::Mlp(params_, "design.critic", trunk, cfg.critic, 1, rng, 1.0);
}

DesignPolicy::Forward DesignPolicy::forward(nn::Tape& t, const nn::GraphInput& g) const {
  nn::Var h = shared_.forward(t, encoder_.forward(t, g));
  nn::Var raw = actor_.forward(t, h);  // 1 x 2M
  return {nn::sigmoid(nn::reshape_rows(raw, cfg_.components)), critic_.forward(t, h)};
}

std::pair<GmmParams, double> DesignPolicy::evaluate(const nn::GraphInput& g) const {
  nn::Tape t;
  auto f = forward(t, g);
  GmmParams gmm;
  gmm.means = f.means.value();
  gmm.sigma = cfg_.sigma;
  return {gmm, f.value.scalar()};
}

}  // namespace decor
