#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>

#include "common/error.hpp"
#include "reward/rewards.hpp"

namespace decor {
namespace {

TEST_CASE("mwaq") {
  const std::vector<double> q{2.0, 1.0};
  CHECK(mwaq(10.0, q) == 30.0);
  CHECK(mwaq(10.0, std::vector<double>{}) == 0.0);
  CHECK(mwaq(0.0, q) == 0.0);
}

TEST_CASE("location terms") {
  RewardWeights w;
  StepObservation obs;
  obs.intersection.veh_queue = {2, 2, 0, 0};
  obs.intersection.veh_max_wait = 8.0;
  obs.intersection.ped_queue = {0, 0, 0, 0};
  LocationObs c;
  c.veh_queue = {0, 0};
  c.ped_queue = {5};
  c.ped_max_wait = 20.0;
  obs.crosswalks = {c};
  auto lt = location_terms(obs, w);
  CHECK(lt.int_veh == 4.0);
  CHECK(lt.int_ped == 0.0);
  REQUIRE(lt.mb_ped.size() == 1);
  CHECK(lt.mb_ped[0] == doctest::Approx(10.0));
  CHECK(lt.mb_veh[0] == 0.0);

  StepObservation zero;
  zero.intersection.veh_queue.assign(4, 0.0);
  zero.intersection.ped_queue.assign(4, 0.0);
  zero.crosswalks.resize(3, LocationObs{{0, 0}, 0, {0}, 0});
  auto z = aggregate(location_terms(zero, w));
  for (double t : z.t) CHECK(t == 0.0);
}

TEST_CASE("L2 aggregation") {
  CHECK(aggregate_crosswalks(std::vector<double>{3.0, 4.0}) == 5.0);
  CHECK(aggregate_crosswalks(std::vector<double>{7.5}) == 7.5);
  CHECK(aggregate_crosswalks(std::vector<double>{}) == 0.0);
  for (int k = 1; k <= 7; ++k) {
    std::vector<double> v(k, 2.0);
    CHECK(aggregate_crosswalks(v) == doctest::Approx(2.0 * std::sqrt(k)));
    CHECK(aggregate_crosswalks(v) <= 2.0 * k + 1e-12);
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(1 + i % 7);
    for (auto& x : v) x = u(rng);
    const double l2 = aggregate_crosswalks(v);
    CHECK(l2 <= std::accumulate(v.begin(), v.end(), 0.0) + 1e-9);
    CHECK(l2 >= *std::max_element(v.begin(), v.end()) - 1e-9);
  }
}

TEST_CASE("control reward variants") {
  RewardWeights w;
  AggregatedTerms zero;
  CHECK(control_reward(zero, RewardVariant::kExponential, w) == -4.0);
  CHECK(control_reward(zero, RewardVariant::kMwaq, w) == 0.0);
  CHECK(control_reward(zero, RewardVariant::kLinear, w) == 0.0);
  AggregatedTerms two;
  two.t[0] = 2.0;
  CHECK(control_reward(two, RewardVariant::kExponential, w) == doctest::Approx(-(std::exp(1.0) + 3.0)));
  CHECK(control_reward(two, RewardVariant::kMwaq, w) == -2.0);
  CHECK(control_reward(two, RewardVariant::kLinear, w) == -1.0);
  AggregatedTerms huge;
  huge.t[3] = 1e300;
  for (auto v : {RewardVariant::kMwaq, RewardVariant::kLinear, RewardVariant::kExponential})
    CHECK(control_reward(huge, v, w) == -2500.0);
}

TEST_CASE("rewards are monotone, ordered and bounded") {
  RewardWeights w;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  for (int i = 0; i < 2000; ++i) {
    AggregatedTerms a;
    for (double& t : a.t) t = u(rng);
    AggregatedTerms b = a;
    b.t[i % 4] += u(rng);
    for (auto v : {RewardVariant::kMwaq, RewardVariant::kLinear, RewardVariant::kExponential}) {
      CHECK(control_reward(b, v, w) <= control_reward(a, v, w));
      const double r = control_reward(a, v, w);
      CHECK(r <= 0.0);
      CHECK(r >= -2500.0);
    }
    CHECK(control_reward_raw(a, RewardVariant::kExponential, w) <=
          control_reward_raw(a, RewardVariant::kLinear, w));
  }
}

TEST_CASE("design reward") {
  RewardWeights w;
  CHECK(design_reward(std::vector<double>{73.21}, 4, w) == doctest::Approx(-81.21));
  CHECK(design_reward(std::vector<double>{0.0}, 0, w) == 0.0);
  CHECK(design_reward(std::vector<double>{50.0, 60.0}, 3, w) == doctest::Approx(-61.0));
  CHECK(design_reward(std::vector<double>{50.0}, 6, w) - design_reward(std::vector<double>{50.0}, 3, w) ==
        doctest::Approx(-6.0));
  CHECK_THROWS_AS(design_reward(std::vector<double>{}, 1, w), Error);
}

TEST_CASE("weights and variant parsing") {
  RewardWeights w;
  CHECK_NOTHROW(w.validate());
  w.clip_hi = 1.0;
  CHECK_THROWS_AS(w.validate(), Error);
  CHECK(parse_reward_variant("ei-mwaq") == RewardVariant::kExponential);
  CHECK(parse_reward_variant("mwaq") == RewardVariant::kMwaq);
  CHECK(parse_reward_variant("li-mwaq") == RewardVariant::kLinear);
  CHECK_THROWS_AS(parse_reward_variant("pressure"), Error);
}

}  // namespace
}  // namespace decor
