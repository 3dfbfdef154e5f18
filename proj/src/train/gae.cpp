#include "train/gae.hpp"

#include <cmath>

#include "common/error.hpp"

namespace decor {

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const int> dones, double last_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw Error(ErrorKind::kContract, "gae inputs must have equal lengths");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double gae = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_v = i + 1 == n ? last_value : values[i + 1];
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_v * live - values[i];
    gae = delta + gamma * lambda * live * gae;
    out.advantages[i] = gae;
    out.returns[i] = gae + values[i];
  }
  return out;
}

void normalize_advantages(std::vector<double>& a) {
  if (a.empty()) return;
  double mean = 0.0;
  for (double x : a) mean += x;
  mean /= static_cast<double>(a.size());
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  var /= static_cast<double>(a.size());
  const double sd = std::sqrt(var);
  for (double& x : a) x = sd > 1e-12 ? (x - mean) / (sd + 1e-8) : x - mean;
}

}  // namespace decor
