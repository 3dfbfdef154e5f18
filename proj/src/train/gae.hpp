#pragma once

#include <span>
#include <vector>

namespace decor {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};

// dones[t] marks a terminal transition after step t (no bootstrap across it).
// last_value bootstraps the step after the final one; pass 0 for a terminal end.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const int> dones, double last_value, double gamma, double lambda);

// Zero mean, unit standard deviation (population); only centred when constant.
void normalize_advantages(std::vector<double>& a);

}  // namespace decor
