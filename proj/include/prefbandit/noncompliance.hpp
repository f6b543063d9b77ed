#pragma once

// Offline fitting of per-user preference vectors from logged rounds.
//
// Each round contributes KL(softmax(utilities) || onehot(chosen)); the model
// sees every offered option, not just the recommended one, so a declined
// recommendation is still a training signal. The recommendation indicator is
// appended as one extra feature column and its weight (the anchoring weight)
// is fitted jointly with the preference weights.
//
// Optimization is full-batch gradient descent with a fixed step. feature_scale
// rescales option features inside the optimizer only; the returned vector is
// folded back to raw feature space, so callers never see the scale.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefbandit/core.hpp"
#include "prefbandit/rng.hpp"

namespace prefbandit {

struct FitConfig {
  double learning_rate = 0.5;
  double l2_penalty = 0.001;
  int max_epochs = 500;
  double param_tolerance = 1e-6;  // sup-norm change per epoch that counts as converged
  double feature_scale = 1.0;     // applied to option features (not the indicator column)
  bool model_recommendation = true;  // false: indicator column forced to zero while training
  double init_std = 0.1;          // entries start at N(0, init_std^2)
};

struct FitOutcome {
  PreferenceVector theta;  // raw-feature space, length d+1
  double objective = 0.0;
  int epochs = 0;
  bool converged = false;
  bool ok = false;
  std::string message;
};

struct FitReport {
  std::map<int, FitOutcome> by_user;  // keyed by user_id; failures included with ok=false
  int d = 0;
  int failures = 0;
  int anchoring_negative = 0;  // fitted anchoring weight < -1e-6
  int anchoring_positive = 0;
};

// [x_a, 1{a == recommended}] for every offered option.
inline std::vector<Vec> augment_with_rec(const std::vector<OptionContext>& options,
                                         int recommended) {
  if (recommended < 0 || static_cast<std::size_t>(recommended) >= options.size())
    throw std::invalid_argument("augment_with_rec: recommended index out of range");
  std::vector<Vec> out;
  out.reserve(options.size());
  for (std::size_t a = 0; a < options.size(); ++a) {
    Vec x = options[a].features;
    x.push_back(a == static_cast<std::size_t>(recommended) ? 1.0 : 0.0);
    out.push_back(std::move(x));
  }
  return out;
}

inline Vec predict_probs(const PreferenceVector& theta,
                         const std::vector<OptionContext>& options,
                         std::optional<int> recommended) {
  return softmax(utilities(theta, options, recommended));
}

namespace detail {

// Rounds pre-expanded to augmented features in optimizer space.
struct FitProblem {
  std::vector<std::vector<Vec>> x;  // [round][option][d+1]
  std::vector<int> chosen;
  std::size_t dim = 0;
};

inline FitProblem build_problem(const std::vector<InteractionRound>& rounds,
                                const FitConfig& cfg) {
  if (rounds.empty()) throw std::invalid_argument("fit_user: no rounds");
  if (!(cfg.feature_scale > 0.0)) throw std::invalid_argument("fit_user: feature_scale must be positive");
  FitProblem prob;
  prob.dim = rounds.front().options.front().features.size() + 1;
  for (const InteractionRound& r : rounds) {
    if (r.options.front().features.size() + 1 != prob.dim)
      throw std::invalid_argument("fit_user: inconsistent option dimension across rounds");
    std::vector<Vec> aug = augment_with_rec(r.options, r.recommended);
    for (Vec& xa : aug) {
      for (std::size_t j = 0; j + 1 < xa.size(); ++j) xa[j] *= cfg.feature_scale;
      if (!cfg.model_recommendation) xa.back() = 0.0;
    }
    if (r.chosen < 0 || static_cast<std::size_t>(r.chosen) >= aug.size())
      throw std::invalid_argument("fit_user: chosen index out of range");
    prob.x.push_back(std::move(aug));
    prob.chosen.push_back(r.chosen);
  }
  return prob;
}

inline double problem_objective(const FitProblem& prob, const Vec& theta, double l2) {
  double total = 0.0;
  for (std::size_t t = 0; t < prob.x.size(); ++t) {
    Vec u(prob.x[t].size());
    for (std::size_t a = 0; a < u.size(); ++a) {
      double s = 0.0;
      for (std::size_t j = 0; j < theta.size(); ++j) s += theta[j] * prob.x[t][a][j];
      u[a] = s;
    }
    total += kl_onehot(softmax(u), prob.chosen[t]);
  }
  total /= static_cast<double>(prob.x.size());
  double reg = 0.0;
  for (double v : theta) reg += v * v;
  return total + l2 * reg;
}

// grad = (1/T) sum_t sum_a (p_a - 1{a==chosen}) x_a + 2*l2*theta
inline Vec problem_gradient(const FitProblem& prob, const Vec& theta, double l2) {
  Vec g(theta.size(), 0.0);
  for (std::size_t t = 0; t < prob.x.size(); ++t) {
    Vec u(prob.x[t].size());
    for (std::size_t a = 0; a < u.size(); ++a) {
      double s = 0.0;
      for (std::size_t j = 0; j < theta.size(); ++j) s += theta[j] * prob.x[t][a][j];
      u[a] = s;
    }
    Vec p = softmax(u);
    p[static_cast<std::size_t>(prob.chosen[t])] -= 1.0;
    for (std::size_t a = 0; a < p.size(); ++a)
      for (std::size_t j = 0; j < theta.size(); ++j) g[j] += p[a] * prob.x[t][a][j];
  }
  const double invT = 1.0 / static_cast<double>(prob.x.size());
  for (std::size_t j = 0; j < theta.size(); ++j) g[j] = g[j] * invT + 2.0 * l2 * theta[j];
  return g;
}

}  // namespace detail

// Objective and analytic gradient in raw feature space; exposed for
// verification against finite differences.
inline double fit_objective(const std::vector<InteractionRound>& rounds,
                            const PreferenceVector& theta, double l2) {
  FitConfig cfg;  // scale 1: raw space
  detail::FitProblem prob = detail::build_problem(rounds, cfg);
  return detail::problem_objective(prob, theta, l2);
}

inline Vec fit_gradient(const std::vector<InteractionRound>& rounds,
                        const PreferenceVector& theta, double l2) {
  FitConfig cfg;
  detail::FitProblem prob = detail::build_problem(rounds, cfg);
  return detail::problem_gradient(prob, theta, l2);
}

// Gradient descent from a seeded random start. Never throws on data that
// merely fits badly: numerical failure is reported in the outcome.
inline FitOutcome fit_user(const std::vector<InteractionRound>& rounds,
                           const FitConfig& cfg, std::uint64_t seed) {
  FitOutcome out;
  detail::FitProblem prob;
  try {
    prob = detail::build_problem(rounds, cfg);
  } catch (const std::exception& e) {
    out.message = e.what();
    return out;
  }
  Rng rng(seed);
  Vec theta(prob.dim);
  for (double& v : theta) v = rng.normal(0.0, cfg.init_std);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Vec g = detail::problem_gradient(prob, theta, cfg.l2_penalty);
    double max_step = 0.0;
    bool finite = true;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      if (!std::isfinite(g[j])) { finite = false; break; }
      const double step = cfg.learning_rate * g[j];
      theta[j] -= step;
      max_step = std::max(max_step, std::fabs(step));
    }
    if (!finite) {
      out.message = "non-finite gradient at epoch " + std::to_string(epoch);
      return out;
    }
    out.epochs = epoch + 1;
    if (max_step < cfg.param_tolerance) { out.converged = true; break; }
  }
  out.objective = detail::problem_objective(prob, theta, cfg.l2_penalty);
  if (!std::isfinite(out.objective)) {
    out.message = "non-finite objective after fitting";
    return out;
  }
  // Fold the optimizer-space scale back so theta applies to raw features.
  for (std::size_t j = 0; j + 1 < theta.size(); ++j) theta[j] *= cfg.feature_scale;
  out.theta = std::move(theta);
  out.ok = true;
  return out;
}

// Per-user fits over a dataset. Seeding is (seed xor user_id) per user, so the
// result is independent of user order and of any parallel fan-out.
inline FitReport fit_population(const Dataset& ds, const FitConfig& cfg, std::uint64_t seed) {
  validate_dataset(ds);
  FitReport report;
  report.d = ds.d;
  for (const UserRecord& u : ds.users) {
    FitOutcome fo = fit_user(u.rounds, cfg, seed ^ static_cast<std::uint64_t>(u.user_id));
    if (!fo.ok) {
      ++report.failures;
    } else {
      const double w = fo.theta.back();
      if (w < -1e-6) ++report.anchoring_negative;
      if (w > 1e-6) ++report.anchoring_positive;
    }
    report.by_user.emplace(u.user_id, std::move(fo));
  }
  return report;
}

inline std::map<int, PreferenceVector> fitted_thetas(const FitReport& report) {
  std::map<int, PreferenceVector> out;
  for (const auto& [id, fo] : report.by_user)
    if (fo.ok) out.emplace(id, fo.theta);
  return out;
}

}  // namespace prefbandit
