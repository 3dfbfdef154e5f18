#include "nn/distributions.hpp"

#include <cmath>
#include <numbers>

#include "common/error.hpp"

namespace decor::nn {

namespace {
void check_sigma(double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::kValidation, "sigma must be > 0");
}
}  // namespace

double gaussian_log_density(const Eigen::RowVectorXd& mean, double sigma, const Eigen::RowVectorXd& x) {
  check_sigma(sigma);
  const double d = static_cast<double>(x.size());
  return -0.5 * (x - mean).squaredNorm() / (sigma * sigma) - d * std::log(sigma) -
         0.5 * d * std::log(2.0 * std::numbers::pi);
}

double gmm_log_density(const Mat& means, double sigma, const Eigen::RowVectorXd& x) {
  check_sigma(sigma);
  Eigen::VectorXd lp(means.rows());
  for (Eigen::Index m = 0; m < means.rows(); ++m) lp(m) = gaussian_log_density(means.row(m), sigma, x);
  const double mx = lp.maxCoeff();
  return mx + std::log((lp.array() - mx).exp().sum()) - std::log(static_cast<double>(means.rows()));
}

Var gmm_log_prob(Var means, double sigma, const Eigen::RowVectorXd& x) {
  check_sigma(sigma);
  Tape& t = *means.tape;
  const double d = static_cast<double>(x.size());
  const double m = static_cast<double>(means.rows());
  Var diff = sub_row(means, t.constant(x));
  Var comp = scale(row_sum(square(diff)), -0.5 / (sigma * sigma));  // M x 1
  const double c = -d * std::log(sigma) - 0.5 * d * std::log(2.0 * std::numbers::pi) - std::log(m);
  return add_scalar(logsumexp(comp), c);
}

Var categorical_log_prob(Var logits, const std::vector<int>& choice) {
  return pick(log_softmax_rows(logits), choice);
}

Var categorical_entropy(Var logits) {
  Var lp = log_softmax_rows(logits);
  return neg(row_sum(mul(exp(lp), lp)));
}

Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& logits) {
  Eigen::RowVectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

int categorical_sample(const Eigen::RowVectorXd& logits, Rng& rng) {
  const Eigen::RowVectorXd p = softmax(logits);
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

int categorical_mode(const Eigen::RowVectorXd& logits) {
  Eigen::Index i = 0;
  logits.maxCoeff(&i);
  return static_cast<int>(i);
}

Var bernoulli_log_prob(Var logits, const Mat& x) {
  // x*z - softplus(z)
  Tape& t = *logits.tape;
  return sub(mul(t.constant(x), logits), softplus(logits));
}

Var bernoulli_entropy(Var logits) {
  // softplus(z) - z*sigmoid(z)
  return sub(softplus(logits), mul(logits, sigmoid(logits)));
}

double bernoulli_prob(double logit) {
  return logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
}

int bernoulli_sample(double logit, Rng& rng) { return uniform01(rng) < bernoulli_prob(logit) ? 1 : 0; }

}  // namespace decor::nn
