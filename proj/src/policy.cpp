#include "acpo/policy.hpp"

#include <algorithm>
#include <cmath>

namespace acpo {

std::string to_string(Parameterization p) {
  return p == Parameterization::TabularSoftmax ? "tabular-softmax" : "linear-softmax";
}

Parameterization parameterization_from_string(const std::string& name) {
  if (name == "tabular-softmax") return Parameterization::TabularSoftmax;
  if (name == "linear-softmax") return Parameterization::LinearSoftmax;
  throw std::invalid_argument("unknown parameterization: " + name);
}

PolicyParams PolicyParams::tabular(int num_states, int num_actions) {
  if (num_states <= 0 || num_actions <= 0) {
    throw std::invalid_argument("policy dimensions must be positive");
  }
  PolicyParams p;
  p.kind_ = Parameterization::TabularSoftmax;
  p.num_states_ = num_states;
  p.num_actions_ = num_actions;
  p.weights_ = Matrix::Zero(num_states, num_actions);
  return p;
}

PolicyParams PolicyParams::linear(Matrix features, int num_actions) {
  if (features.rows() <= 0 || features.cols() <= 0 || num_actions <= 0) {
    throw std::invalid_argument("policy dimensions must be positive");
  }
  if (!features.allFinite()) throw NumericError("feature map has non-finite entries");
  PolicyParams p;
  p.kind_ = Parameterization::LinearSoftmax;
  p.num_states_ = static_cast<int>(features.rows());
  p.num_actions_ = num_actions;
  p.weights_ = Matrix::Zero(features.cols(), num_actions);
  p.features_ = std::move(features);
  return p;
}

Matrix PolicyParams::logits() const {
  if (kind_ == Parameterization::TabularSoftmax) return weights_;
  return features_ * weights_;
}

Vector softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp();
  return e / e.sum();
}

Vector log_softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return logits.array() - lse;
}

Matrix PolicyParams::prob_table() const {
  Matrix z = logits();
  if (!z.allFinite()) throw NumericError("policy logits are not finite");
  for (int s = 0; s < z.rows(); ++s) z.row(s) = softmax(z.row(s).transpose()).transpose();
  return z;
}

Matrix PolicyParams::log_prob_table() const {
  Matrix z = logits();
  if (!z.allFinite()) throw NumericError("policy logits are not finite");
  for (int s = 0; s < z.rows(); ++s) z.row(s) = log_softmax(z.row(s).transpose()).transpose();
  return z;
}

PolicyDist PolicyParams::action_dist(int state) const {
  if (state < 0 || state >= num_states_) throw std::invalid_argument("state out of range");
  Vector z = kind_ == Parameterization::TabularSoftmax
                 ? Vector(weights_.row(state).transpose())
                 : Vector((features_.row(state) * weights_).transpose());
  if (!z.allFinite()) throw NumericError("policy logits are not finite");
  return PolicyDist{softmax(z)};
}

Matrix PolicyParams::logits_to_weights_gradient(const Matrix& dlogits) const {
  if (kind_ == Parameterization::TabularSoftmax) return dlogits;
  return features_.transpose() * dlogits;
}

bool PolicyParams::operator==(const PolicyParams& other) const {
  return kind_ == other.kind_ && num_states_ == other.num_states_ &&
         num_actions_ == other.num_actions_ && weights_ == other.weights_ &&
         features_.size() == other.features_.size() &&
         (features_.size() == 0 || features_ == other.features_);
}

double kl_divergence(const Matrix& p_probs, const Matrix& q_probs, const Vector& state_weights) {
  if (p_probs.rows() != q_probs.rows() || p_probs.cols() != q_probs.cols()) {
    throw std::invalid_argument("policies are bound to different specs");
  }
  if (state_weights.size() != p_probs.rows()) {
    throw std::invalid_argument("state weights have wrong length");
  }
  double total = 0.0;
  for (int s = 0; s < p_probs.rows(); ++s) {
    const double w = state_weights[s];
    if (w == 0.0) continue;
    double kl = 0.0;
    for (int a = 0; a < p_probs.cols(); ++a) {
      const double pa = p_probs(s, a);
      if (pa == 0.0) continue;
      const double qa = q_probs(s, a);
      if (qa == 0.0) throw NumericError("KL undefined: q has zero mass where p does not");
      kl += pa * (std::log(pa) - std::log(qa));
    }
    total += w * kl;
  }
  return std::max(total, 0.0);
}

double kl_divergence(const PolicyParams& p, const PolicyParams& q, const Vector& state_weights) {
  if (p.num_states() != q.num_states() || p.num_actions() != q.num_actions()) {
    throw std::invalid_argument("policies are bound to different specs");
  }
  if (p == q) return 0.0;
  const Matrix lp = p.log_prob_table();
  const Matrix lq = q.log_prob_table();
  if (state_weights.size() != lp.rows()) {
    throw std::invalid_argument("state weights have wrong length");
  }
  double total = 0.0;
  for (int s = 0; s < lp.rows(); ++s) {
    const double w = state_weights[s];
    if (w == 0.0) continue;
    double kl = 0.0;
    for (int a = 0; a < lp.cols(); ++a) kl += std::exp(lp(s, a)) * (lp(s, a) - lq(s, a));
    total += w * kl;
  }
  return std::max(total, 0.0);
}

Vector entropy(const PolicyParams& p) {
  const Matrix lp = p.log_prob_table();
  Vector h(lp.rows());
  for (int s = 0; s < lp.rows(); ++s) h[s] = -(lp.row(s).array().exp() * lp.row(s).array()).sum();
  return h;
}

namespace {

std::vector<double> flatten(const Matrix& m) {
  std::vector<double> v;
  v.reserve(m.size());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  return v;
}

Matrix unflatten(const std::vector<double>& v, int rows, int cols) {
  if (v.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("tensor length does not match its shape");
  }
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r) * cols + c];
  return m;
}

}  // namespace

nlohmann::json to_json(const PolicyParams& p) {
  nlohmann::json j;
  j["parameterization"] = to_string(p.parameterization());
  j["num_states"] = p.num_states();
  j["num_actions"] = p.num_actions();
  j["shape"] = {p.weights().rows(), p.weights().cols()};
  j["weights"] = flatten(p.weights());
  if (p.parameterization() == Parameterization::LinearSoftmax) {
    j["feature_shape"] = {p.features().rows(), p.features().cols()};
    j["features"] = flatten(p.features());
  }
  return j;
}

PolicyParams policy_from_json(const nlohmann::json& j) {
  const auto kind = parameterization_from_string(j.at("parameterization").get<std::string>());
  const auto shape = j.at("shape").get<std::vector<int>>();
  if (shape.size() != 2) throw std::invalid_argument("policy shape must have two entries");
  const int A = j.at("num_actions").get<int>();
  PolicyParams p;
  if (kind == Parameterization::TabularSoftmax) {
    p = PolicyParams::tabular(j.at("num_states").get<int>(), A);
  } else {
    const auto fshape = j.at("feature_shape").get<std::vector<int>>();
    p = PolicyParams::linear(
        unflatten(j.at("features").get<std::vector<double>>(), fshape.at(0), fshape.at(1)), A);
  }
  if (p.weights().rows() != shape[0] || p.weights().cols() != shape[1]) {
    throw std::invalid_argument("policy weight shape mismatch");
  }
  p.weights() = unflatten(j.at("weights").get<std::vector<double>>(), shape[0], shape[1]);
  if (!p.weights().allFinite()) throw NumericError("policy checkpoint has non-finite weights");
  return p;
}

void AdamState::ascend(Matrix& params, const Matrix& grad, double lr) {
  if (m.rows() != grad.rows() || m.cols() != grad.cols()) {
    m = Matrix::Zero(grad.rows(), grad.cols());
    v = Matrix::Zero(grad.rows(), grad.cols());
    step = 0;
  }
  ++step;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  params.array() += lr * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
}

}  // namespace acpo
