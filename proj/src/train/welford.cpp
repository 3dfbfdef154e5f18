#include "train/welford.hpp"

#include <cmath>

#include "common/error.hpp"

namespace decor {

void WelfordStats::update(double x) {
  ++count;
  const double d = x - mean;
  mean += d / static_cast<double>(count);
  m2 += d * (x - mean);
}

void WelfordStats::merge(const WelfordStats& o) {
  if (o.count == 0) return;
  if (count == 0) {
    *this = o;
    return;
  }
  const double n = static_cast<double>(count + o.count);
  const double d = o.mean - mean;
  mean += d * static_cast<double>(o.count) / n;
  m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
  count += o.count;
}

double WelfordStats::variance() const {
  return count < 2 ? 0.0 : m2 / static_cast<double>(count - 1);
}

double WelfordStats::normalize(double x) const {
  return (x - mean) / std::sqrt(variance() + kNormEps);
}

nlohmann::json WelfordStats::to_json() const {
  return {{"count", count}, {"mean", mean}, {"m2", m2}};
}

WelfordStats WelfordStats::from_json(const nlohmann::json& j) {
  WelfordStats s;
  s.count = j.at("count").get<long long>();
  s.mean = j.at("mean").get<double>();
  s.m2 = j.at("m2").get<double>();
  return s;
}

WelfordVector::WelfordVector(int dim)
    : mean(Eigen::RowVectorXd::Zero(dim)), m2(Eigen::RowVectorXd::Zero(dim)) {}

void WelfordVector::update(const Eigen::RowVectorXd& x) {
  if (x.size() != mean.size()) throw Error(ErrorKind::kContract, "welford width mismatch");
  ++count;
  const Eigen::RowVectorXd d = x - mean;
  mean += d / static_cast<double>(count);
  m2.array() += d.array() * (x - mean).array();
}

void WelfordVector::update_rows(const Eigen::MatrixXd& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) update(rows.row(r));
}

Eigen::RowVectorXd WelfordVector::variance() const {
  if (count < 2) return Eigen::RowVectorXd::Zero(mean.size());
  return m2 / static_cast<double>(count - 1);
}

Eigen::MatrixXd WelfordVector::normalize(const Eigen::MatrixXd& rows, double clip) const {
  if (rows.cols() != mean.size()) throw Error(ErrorKind::kContract, "welford width mismatch");
  const Eigen::RowVectorXd inv = (variance().array() + kNormEps).rsqrt().matrix();
  Eigen::MatrixXd out = (rows.rowwise() - mean).array().rowwise() * inv.array();
  return out.cwiseMax(-clip).cwiseMin(clip);
}

nlohmann::json WelfordVector::to_json() const {
  return {{"count", count},
          {"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"m2", std::vector<double>(m2.data(), m2.data() + m2.size())}};
}

WelfordVector WelfordVector::from_json(const nlohmann::json& j) {
  auto mean = j.at("mean").get<std::vector<double>>();
  auto m2 = j.at("m2").get<std::vector<double>>();
  if (mean.size() != m2.size()) throw Error(ErrorKind::kParse, "welford stats width mismatch");
  WelfordVector v(static_cast<int>(mean.size()));
  v.count = j.at("count").get<long long>();
  for (std::size_t i = 0; i < mean.size(); ++i) {
    v.mean(static_cast<Eigen::Index>(i)) = mean[i];
    v.m2(static_cast<Eigen::Index>(i)) = m2[i];
  }
  return v;
}

}  // namespace decor
