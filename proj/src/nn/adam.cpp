#include "nn/adam.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace decor::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (auto* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) continue;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
  }
}

nlohmann::json Adam::state_json() const {
  nlohmann::json j;
  j["t"] = t_;
  j["lr"] = cfg_.lr;
  nlohmann::json ms = nlohmann::json::array(), vs = nlohmann::json::array();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ms.push_back(std::vector<double>(m_[i].data(), m_[i].data() + m_[i].size()));
    vs.push_back(std::vector<double>(v_[i].data(), v_[i].data() + v_[i].size()));
  }
  j["m"] = ms;
  j["v"] = vs;
  return j;
}

void Adam::load_state(const nlohmann::json& j) {
  const auto& ms = j.at("m");
  const auto& vs = j.at("v");
  if (ms.size() != params_.size() || vs.size() != params_.size())
    throw Error(ErrorKind::kValidation, "optimizer state does not match parameters");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto m = ms[i].get<std::vector<double>>();
    auto v = vs[i].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(m.size()) != m_[i].size() ||
        static_cast<Eigen::Index>(v.size()) != v_[i].size())
      throw Error(ErrorKind::kValidation, "optimizer state shape mismatch");
    std::copy(m.begin(), m.end(), m_[i].data());
    std::copy(v.begin(), v.end(), v_[i].data());
  }
  t_ = j.at("t").get<long long>();
  cfg_.lr = j.at("lr").get<double>();
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (auto* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0)
    for (auto* p : params) p->grad *= max_norm / norm;
  return norm;
}

double linear_anneal(double lr0, long long done, long long total) {
  if (total <= 0) return lr0;
  return lr0 * std::max(0.0, 1.0 - static_cast<double>(done) / static_cast<double>(total));
}

}  // namespace decor::nn
