#include "acpo/budget.hpp"

#include <cmath>

namespace acpo {

std::string to_string(StageKind kind) {
  switch (kind) {
    case StageKind::MaxReward:
      return "max-reward";
    case StageKind::MinCost:
      return "min-cost";
    case StageKind::Projection:
      return "projection";
  }
  return "unknown";
}

ReturnQueue::ReturnQueue(int capacity) : capacity_(capacity) {
  if (capacity < 2) throw std::invalid_argument("queue capacity must be at least 2");
}

void ReturnQueue::push(double value) {
  values_.push_back(value);
  while (static_cast<int>(values_.size()) > capacity_) values_.pop_front();
}

std::optional<double> ReturnQueue::mean() const {
  if (values_.empty()) return std::nullopt;
  double sum = 0.0;
  for (double v : values_) sum += v;
  return sum / static_cast<double>(values_.size());
}

std::optional<double> ReturnQueue::stddev() const {
  const auto mu = mean();
  if (!mu) return std::nullopt;
  double ss = 0.0;
  for (double v : values_) ss += (v - *mu) * (v - *mu);
  return std::sqrt(ss / static_cast<double>(values_.size()));
}

BudgetState BudgetState::initial(const Vector& d0, const Vector& desired, int queue_capacity) {
  if (d0.size() != desired.size()) {
    throw std::invalid_argument("initial and desired budgets differ in length");
  }
  BudgetState st;
  st.cost_budget = d0;
  st.desired = desired;
  st.queue_reward = ReturnQueue(queue_capacity);
  st.queue_cost.assign(d0.size(), ReturnQueue(queue_capacity));
  return st;
}

}  // namespace acpo
