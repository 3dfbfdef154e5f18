#pragma once

#include "common/rng.hpp"
#include "nn/tape.hpp"

namespace decor::nn {

// Isotropic Gaussian log-density.
double gaussian_log_density(const Eigen::RowVectorXd& mean, double sigma, const Eigen::RowVectorXd& x);
// Equal-weight mixture of isotropic Gaussians; means is M x d.
double gmm_log_density(const Mat& means, double sigma, const Eigen::RowVectorXd& x);
Var gmm_log_prob(Var means, double sigma, const Eigen::RowVectorXd& x);  // 1 x 1

// Categorical over the columns of each row of logits.
Var categorical_log_prob(Var logits, const std::vector<int>& choice);  // B x 1
Var categorical_entropy(Var logits);                                   // B x 1
Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& logits);
int categorical_sample(const Eigen::RowVectorXd& logits, Rng& rng);
int categorical_mode(const Eigen::RowVectorXd& logits);

// Independent Bernoulli per entry of logits.
Var bernoulli_log_prob(Var logits, const Mat& x);  // elementwise
Var bernoulli_entropy(Var logits);                 // elementwise
double bernoulli_prob(double logit);
int bernoulli_sample(double logit, Rng& rng);

}  // namespace decor::nn
