#pragma once

#include <string>

#include "json.hpp"

#include "acpo/common.hpp"

namespace acpo {

enum class Parameterization { TabularSoftmax, LinearSoftmax };

std::string to_string(Parameterization p);
Parameterization parameterization_from_string(const std::string& name);

/// Action distribution at one state.
struct PolicyDist {
  Vector probs;
};

/// Softmax policy over a finite action set.
///
/// Tabular: one logit per (state, action); `weights` is S x A.
/// Linear: logits(s) = features.row(s) * weights with `features` S x F and
/// `weights` F x A. The feature map is stored as a table since states are
/// finite.
class PolicyParams {
 public:
  PolicyParams() = default;

  static PolicyParams tabular(int num_states, int num_actions);
  static PolicyParams linear(Matrix features, int num_actions);

  Parameterization parameterization() const { return kind_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  const Matrix& weights() const { return weights_; }
  Matrix& weights() { return weights_; }
  const Matrix& features() const { return features_; }

  /// Logits of every state, S x A.
  Matrix logits() const;
  /// Row-stochastic S x A table of action probabilities. Throws NumericError
  /// on non-finite logits.
  Matrix prob_table() const;
  /// Elementwise log of prob_table, computed stably.
  Matrix log_prob_table() const;

  PolicyDist action_dist(int state) const;

  /// Maps dL/dlogits (S x A) to dL/dweights.
  Matrix logits_to_weights_gradient(const Matrix& dlogits) const;

  bool operator==(const PolicyParams& other) const;

 private:
  Parameterization kind_ = Parameterization::TabularSoftmax;
  int num_states_ = 0;
  int num_actions_ = 0;
  Matrix weights_;
  Matrix features_;
};

/// Stable softmax of one logit vector (max-shifted).
Vector softmax(const Vector& logits);
/// Stable log-softmax of one logit vector.
Vector log_softmax(const Vector& logits);

/// E_{s ~ state_weights} KL(p(.|s) || q(.|s)).
double kl_divergence(const PolicyParams& p, const PolicyParams& q, const Vector& state_weights);
/// Same on precomputed probability tables (S x A).
double kl_divergence(const Matrix& p_probs, const Matrix& q_probs, const Vector& state_weights);

/// Entropy of the action distribution at each state.
Vector entropy(const PolicyParams& p);

nlohmann::json to_json(const PolicyParams& p);
PolicyParams policy_from_json(const nlohmann::json& j);

/// Adaptive-moment gradient ascent state for one parameter matrix.
struct AdamState {
  Matrix m;
  Matrix v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Applies one ascent step of size `lr` along `grad` to `params`.
  void ascend(Matrix& params, const Matrix& grad, double lr);
};

}  // namespace acpo
