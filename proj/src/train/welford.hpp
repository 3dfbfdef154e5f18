#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace decor {

inline constexpr double kNormEps = 1e-8;

// Online mean and variance, one scalar stream.
struct WelfordStats {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void update(double x);
  void merge(const WelfordStats& other);  // parallel combination
  double variance() const;                // sample variance, 0 below 2 samples
  double normalize(double x) const;       // (x - mean) / sqrt(var + eps)

  nlohmann::json to_json() const;
  static WelfordStats from_json(const nlohmann::json& j);
};

// Per-column statistics; each row of a matrix is one sample.
struct WelfordVector {
  long long count = 0;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd m2;

  WelfordVector() = default;
  explicit WelfordVector(int dim);
  int dim() const { return static_cast<int>(mean.size()); }

  void update(const Eigen::RowVectorXd& x);
  void update_rows(const Eigen::MatrixXd& rows);
  Eigen::RowVectorXd variance() const;
  // Column-wise normalization clipped to [-clip, clip].
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& rows, double clip) const;

  nlohmann::json to_json() const;
  static WelfordVector from_json(const nlohmann::json& j);
};

}  // namespace decor
