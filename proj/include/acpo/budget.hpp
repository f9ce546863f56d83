#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "acpo/common.hpp"

namespace acpo {

enum class StageKind { MaxReward = 0, MinCost = 1, Projection = 2 };

std::string to_string(StageKind kind);

/// Bounded FIFO of episode-return estimates; evicts the oldest entry once
/// `capacity` is reached.
class ReturnQueue {
 public:
  explicit ReturnQueue(int capacity = 10);

  void push(double value);
  void clear() { values_.clear(); }

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(values_.size()); }
  bool ready() const { return !values_.empty(); }
  const std::deque<double>& values() const { return values_; }

  /// Mean of all held entries; empty when nothing has been pushed yet.
  std::optional<double> mean() const;
  /// Population standard deviation of all held entries.
  std::optional<double> stddev() const;

 private:
  int capacity_;
  std::deque<double> values_;
};

/// Budgets and stage bookkeeping for the adaptive scheduler.
struct BudgetState {
  Vector cost_budget;   ///< d^k, one entry per constraint
  double reward_budget = 0.0;  ///< g^k
  Vector desired;       ///< d_des
  StageKind stage = StageKind::MaxReward;
  ReturnQueue queue_reward;
  std::vector<ReturnQueue> queue_cost;
  int iter_in_stage = 0;
  int global_iter = 0;

  static BudgetState initial(const Vector& d0, const Vector& desired, int queue_capacity);
  int num_costs() const { return static_cast<int>(cost_budget.size()); }
};

}  // namespace acpo
