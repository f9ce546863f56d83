#include "acpo/cmdp.hpp"

#include <cmath>
#include <sstream>

namespace acpo {

namespace {

constexpr double kStochasticTol = 1e-12;

std::string where(int s, int a) {
  std::ostringstream os;
  os << "(s=" << s << ", a=" << a << ")";
  return os.str();
}

}  // namespace

CmdpSpec make_empty_spec(int num_states, int num_actions, int num_costs, double discount,
                         int horizon) {
  CmdpSpec spec;
  spec.num_states = num_states;
  spec.num_actions = num_actions;
  spec.transition.assign(static_cast<std::size_t>(num_states) * num_actions * num_states, 0.0);
  spec.reward = Matrix::Zero(num_states, num_actions);
  spec.costs.assign(num_costs, Matrix::Zero(num_states, num_actions));
  spec.initial_dist = Vector::Zero(num_states);
  spec.discount = discount;
  spec.horizon = horizon;
  return spec;
}

bool CmdpSpec::is_absorbing(int s) const {
  for (int a = 0; a < num_actions; ++a) {
    if (p(s, a, s) != 1.0 || reward(s, a) != 0.0) return false;
    for (const auto& c : costs) {
      if (c(s, a) != 0.0) return false;
    }
  }
  return true;
}

void CmdpSpec::validate() const {
  if (num_states <= 0) throw std::invalid_argument("num_states must be positive");
  if (num_actions <= 0) throw std::invalid_argument("num_actions must be positive");
  if (transition.size() != static_cast<std::size_t>(num_states) * num_actions * num_states) {
    throw std::invalid_argument("transition tensor has wrong size");
  }
  if (reward.rows() != num_states || reward.cols() != num_actions) {
    throw std::invalid_argument("reward tensor has wrong shape");
  }
  if (costs.empty()) throw std::invalid_argument("at least one cost function is required");
  for (const auto& c : costs) {
    if (c.rows() != num_states || c.cols() != num_actions) {
      throw std::invalid_argument("cost tensor has wrong shape");
    }
    if (!c.allFinite()) throw std::invalid_argument("cost tensor has non-finite entries");
  }
  if (!reward.allFinite()) throw std::invalid_argument("reward tensor has non-finite entries");
  if (initial_dist.size() != num_states) {
    throw std::invalid_argument("initial_dist has wrong length");
  }
  if (!(discount > 0.0 && discount < 1.0)) {
    throw std::invalid_argument("discount must lie in (0, 1)");
  }
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      double sum = 0.0;
      for (int n = 0; n < num_states; ++n) {
        const double v = p(s, a, n);
        if (!(v >= 0.0 && v <= 1.0)) {
          throw std::invalid_argument("transition entry outside [0,1] at " + where(s, a));
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kStochasticTol) {
        throw std::invalid_argument("transition row does not sum to 1 at " + where(s, a));
      }
    }
  }
  double total = 0.0;
  for (int s = 0; s < num_states; ++s) {
    if (!(initial_dist[s] >= 0.0)) throw std::invalid_argument("initial_dist has negative mass");
    total += initial_dist[s];
  }
  if (std::abs(total - 1.0) > kStochasticTol) {
    throw std::invalid_argument("initial_dist does not sum to 1");
  }
}

EnvState reset(const CmdpSpec& spec, Rng rng) {
  EnvState env;
  env.rng = std::move(rng);
  reset_in_place(spec, env);
  return env;
}

void reset_in_place(const CmdpSpec& spec, EnvState& env) {
  env.state_index = sample_categorical(spec.initial_dist, env.rng);
  env.steps_elapsed = 0;
  env.done = false;
}

StepResult step(const CmdpSpec& spec, EnvState& env, int action) {
  if (action < 0 || action >= spec.num_actions) {
    throw std::invalid_argument("action out of range");
  }
  if (env.done) throw StateError("cannot step a finished episode");
  const int s = env.state_index;
  StepResult out;
  out.reward = spec.reward(s, action);
  out.costs.resize(spec.costs.size());
  for (std::size_t i = 0; i < spec.costs.size(); ++i) out.costs[i] = spec.costs[i](s, action);

  const double* next = spec.row(s, action);
  const double u = uniform01(env.rng);
  double acc = 0.0;
  int chosen = -1;
  for (int n = 0; n < spec.num_states; ++n) {
    acc += next[n];
    if (u < acc) {
      chosen = n;
      break;
    }
  }
  if (chosen < 0) {
    for (int n = spec.num_states - 1; n >= 0; --n) {
      if (next[n] > 0.0) {
        chosen = n;
        break;
      }
    }
  }
  env.state_index = chosen;
  env.steps_elapsed += 1;
  out.terminal = spec.is_absorbing(chosen);
  out.done = out.terminal || env.steps_elapsed == spec.horizon;
  env.done = out.done;
  return out;
}

void CostShapingSpec::validate() const {
  if (!(lower_bound < upper_bound)) throw std::invalid_argument("shaping requires b_l < b_r");
  if (!(smoothing > 0.0)) throw std::invalid_argument("shaping requires sigma > 0");
}

double shape_cost(double c, const CostShapingSpec& shaping) {
  double out = 0.0;
  if (std::isfinite(shaping.upper_bound)) {
    out += 0.5 * (1.0 + std::erf((c - shaping.upper_bound) / shaping.smoothing));
  }
  if (std::isfinite(shaping.lower_bound)) {
    out += 0.5 * (1.0 + std::erf((shaping.lower_bound - c) / shaping.smoothing));
  }
  return out;
}

nlohmann::json to_json(const CmdpSpec& spec) {
  nlohmann::json j;
  j["num_states"] = spec.num_states;
  j["num_actions"] = spec.num_actions;
  j["transition"] = spec.transition;
  auto flat = [](const Matrix& m) {
    std::vector<double> v;
    v.reserve(m.size());
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    return v;
  };
  j["reward"] = flat(spec.reward);
  auto costs = nlohmann::json::array();
  for (const auto& c : spec.costs) costs.push_back(flat(c));
  j["costs"] = costs;
  j["initial_dist"] = std::vector<double>(spec.initial_dist.data(),
                                          spec.initial_dist.data() + spec.initial_dist.size());
  j["discount"] = spec.discount;
  j["horizon"] = spec.horizon;
  return j;
}

CmdpSpec spec_from_json(const nlohmann::json& j) {
  const int S = j.at("num_states").get<int>();
  const int A = j.at("num_actions").get<int>();
  const auto& costs = j.at("costs");
  CmdpSpec spec = make_empty_spec(S, A, static_cast<int>(costs.size()),
                                  j.at("discount").get<double>(), j.at("horizon").get<int>());
  spec.transition = j.at("transition").get<std::vector<double>>();
  auto unflat = [S, A](const std::vector<double>& v, Matrix& m) {
    if (v.size() != static_cast<std::size_t>(S) * A) {
      throw std::invalid_argument("tensor has wrong length");
    }
    for (int r = 0; r < S; ++r)
      for (int c = 0; c < A; ++c) m(r, c) = v[static_cast<std::size_t>(r) * A + c];
  };
  unflat(j.at("reward").get<std::vector<double>>(), spec.reward);
  for (std::size_t i = 0; i < costs.size(); ++i) {
    unflat(costs[i].get<std::vector<double>>(), spec.costs[i]);
  }
  const auto init = j.at("initial_dist").get<std::vector<double>>();
  if (init.size() != static_cast<std::size_t>(S)) {
    throw std::invalid_argument("initial_dist has wrong length");
  }
  spec.initial_dist = Eigen::Map<const Vector>(init.data(), S);
  spec.validate();
  return spec;
}

}  // namespace acpo
