#pragma once

// Synthetic travel-route population.
//
// A small survey is synthesized: each respondent has a latent 2-d preference
// (travel-time weight, emission weight) and reports, for seven alternative
// route profiles, the probability of taking that route over the regular one.
// Per-respondent preference samples are then drawn by rejection sampling
// against the reported likelihoods, an anchoring weight is attached, and
// logged interaction rounds (regular route vs a noisy eco route, uniform
// random logging recommendations, softmax choices) are generated.
//
// Option features are [travel time, emission], both as percentages of the
// regular route, so the regular route is always [100, 100].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefbandit/core.hpp"
#include "prefbandit/rng.hpp"

namespace prefbandit {

struct GenConfig {
  int respondents = 43;
  int samples_per_respondent = 24;
  double lambda = 6.0;            // rejection sharpness: accept w.p. exp(-lambda * mse)
  Vec theta_mean = {-0.1, -0.1};
  Vec theta_std = {0.1, 0.1};     // diagonal MVN
  double beta = 1.0;              // anchoring scale; 0 disables anchoring exactly
  double anchor_shape_a = 0.3;
  double anchor_shape_b = 0.3;
  Vec regular_route = {100.0, 100.0};
  Vec eco_mean = {104.29, 91.99};
  Vec eco_std = {5.62, 4.06};
  int T = 40;
  int n_train = 446;
  int n_test = 298;
  int age_bins = 3;               // user context: age one-hot
  int education_bins = 3;         //               education one-hot
  bool argmax_choice = false;     // true: deterministic utility argmax instead of softmax draw
  std::uint64_t max_rejections = 1000000;
};

// Seven alternative profiles spanning the time-for-emission trade (percent of
// the regular route). Shared by the survey synthesizer and the sampler.
inline const std::vector<Vec>& route_profiles() {
  static const std::vector<Vec> profiles = {
      {102.0, 96.0}, {104.0, 93.0}, {106.0, 90.0}, {108.0, 87.0},
      {110.0, 84.0}, {112.0, 81.0}, {114.0, 78.0}};
  return profiles;
}

struct SurveyRow {
  int respondent_id = 0;
  Vec likelihoods;  // one per route profile, in [0, 1]
};

struct SurveyTable {
  std::vector<Vec> profiles;
  std::vector<SurveyRow> rows;
};

// P(take profile j over the regular route) for a 2-d preference: a two-option
// softmax, i.e. sigmoid of the utility difference.
inline Vec implied_likelihoods(const Vec& theta2, const GenConfig& cfg) {
  if (theta2.size() != cfg.theta_mean.size())
    throw std::invalid_argument("implied_likelihoods: theta dimension mismatch");
  Vec out;
  for (const Vec& profile : route_profiles()) {
    double du = 0.0;
    for (std::size_t j = 0; j < theta2.size(); ++j)
      du += theta2[j] * (profile[j] - cfg.regular_route[j]);
    out.push_back(1.0 / (1.0 + std::exp(-du)));
  }
  return out;
}

inline SurveyTable synth_survey(const GenConfig& cfg, std::uint64_t seed) {
  if (cfg.respondents < 1) throw std::invalid_argument("synth_survey: respondents must be >= 1");
  SurveyTable table;
  table.profiles = route_profiles();
  Rng rng(derive_seed(seed, "survey"));
  for (int r = 0; r < cfg.respondents; ++r) {
    Vec theta(cfg.theta_mean.size());
    for (std::size_t j = 0; j < theta.size(); ++j)
      theta[j] = rng.normal(cfg.theta_mean[j], cfg.theta_std[j]);
    table.rows.push_back({r, implied_likelihoods(theta, cfg)});
  }
  return table;
}

struct AcceptanceStall : std::runtime_error {
  AcceptanceStall(int respondent, std::uint64_t draws, double best_mse)
      : std::runtime_error("rejection sampling stalled for respondent " + std::to_string(respondent) +
                           " after " + std::to_string(draws) + " draws (best mse " +
                           std::to_string(best_mse) + ")"),
        respondent_id(respondent), draws_tried(draws), best_mse_seen(best_mse) {}
  int respondent_id;
  std::uint64_t draws_tried;
  double best_mse_seen;
};

struct SampleStats {
  std::uint64_t draws = 0;
  std::uint64_t accepted = 0;
};

// Draw preference samples consistent with one survey row: propose from the
// population MVN, accept with probability exp(-lambda * mse(implied, reported)).
inline std::vector<Vec> sample_theta(const SurveyRow& row, const GenConfig& cfg,
                                     std::uint64_t seed, SampleStats* stats = nullptr) {
  std::vector<Vec> out;
  Rng rng(derive_seed(seed, "accept", static_cast<std::uint64_t>(row.respondent_id)));
  std::uint64_t draws = 0;
  double best_mse = std::numeric_limits<double>::infinity();
  while (out.size() < static_cast<std::size_t>(cfg.samples_per_respondent)) {
    if (draws >= cfg.max_rejections)
      throw AcceptanceStall(row.respondent_id, draws, best_mse);
    ++draws;
    Vec theta(cfg.theta_mean.size());
    for (std::size_t j = 0; j < theta.size(); ++j)
      theta[j] = rng.normal(cfg.theta_mean[j], cfg.theta_std[j]);
    const Vec implied = implied_likelihoods(theta, cfg);
    double mse = 0.0;
    for (std::size_t j = 0; j < implied.size(); ++j) {
      const double diff = implied[j] - row.likelihoods[j];
      mse += diff * diff;
    }
    mse /= static_cast<double>(implied.size());
    best_mse = std::min(best_mse, mse);
    if (rng.uniform() < std::exp(-cfg.lambda * mse)) out.push_back(std::move(theta));
  }
  if (stats != nullptr) {
    stats->draws += draws;
    stats->accepted += out.size();
  }
  return out;
}

// Append the anchoring weight: beta * Beta(a, b) per user; exactly 0.0 when
// beta is 0.
inline std::vector<PreferenceVector> attach_anchoring(const std::vector<Vec>& thetas,
                                                      const GenConfig& cfg, Rng& rng) {
  std::vector<PreferenceVector> out;
  out.reserve(thetas.size());
  for (const Vec& t : thetas) {
    PreferenceVector full = t;
    full.push_back(cfg.beta == 0.0 ? 0.0 : cfg.beta * rng.beta(cfg.anchor_shape_a, cfg.anchor_shape_b));
    out.push_back(std::move(full));
  }
  return out;
}

// T rounds of {regular, eco}; the eco route's features are independent
// normals around the configured mean.
inline std::vector<InteractionRound> gen_rounds(const GenConfig& cfg, Rng& rng, int user_id) {
  std::vector<InteractionRound> rounds;
  for (int t = 0; t < cfg.T; ++t) {
    InteractionRound r;
    r.user_id = user_id;
    r.round_index = t + 1;
    r.options.push_back({cfg.regular_route});
    Vec eco(cfg.eco_mean.size());
    for (std::size_t j = 0; j < eco.size(); ++j) eco[j] = rng.normal(cfg.eco_mean[j], cfg.eco_std[j]);
    r.options.push_back({std::move(eco)});
    rounds.push_back(std::move(r));
  }
  return rounds;
}

// Choice given an issued recommendation: softmax draw through a supplied
// uniform (common random numbers across counterfactual recommendations), or
// the utility argmax in deterministic mode.
inline int gen_choice(const PreferenceVector& theta, const InteractionRound& round,
                      double u01, bool argmax_choice) {
  const Vec probs = softmax(utilities(theta, round.options, round.recommended));
  if (argmax_choice) return argmax_lowest_tie(probs);
  return Rng::pick(probs, 1.0, u01);
}

struct TravelPopulation {
  Dataset train;  // logged rounds: uniform random recommendations, generated choices
  Dataset test;   // same layout; the harness re-issues recommendations online
  std::map<int, PreferenceVector> true_thetas;     // all kept users
  std::map<int, int> respondent_of;                // user_id -> respondent
  std::map<int, std::vector<double>> choice_u;     // test users: per-round uniforms
  nlohmann::ordered_json provenance;
};

inline UserContext gen_user_context(const GenConfig& cfg, Rng& rng) {
  UserContext u;
  const int age = rng.uniform_int(0, cfg.age_bins - 1);
  for (int j = 0; j < cfg.age_bins; ++j) u.features.push_back(j == age ? 1.0 : 0.0);
  u.features.push_back(rng.uniform() < 0.5 ? 1.0 : 0.0);  // gender
  const int edu = rng.uniform_int(0, cfg.education_bins - 1);
  for (int j = 0; j < cfg.education_bins; ++j) u.features.push_back(j == edu ? 1.0 : 0.0);
  u.features.push_back(rng.uniform() < 0.5 ? 1.0 : 0.0);  // car ownership
  u.features.push_back(1.0);                              // intercept
  return u;
}

// Full pipeline: survey -> per-respondent samples -> anchoring -> disjoint
// train/test user split (surplus discarded) -> logged rounds for both splits.
inline TravelPopulation build_population(const GenConfig& cfg, std::uint64_t seed) {
  const int total = cfg.respondents * cfg.samples_per_respondent;
  if (cfg.n_train + cfg.n_test > total)
    throw std::invalid_argument("build_population: split larger than sampled population");

  TravelPopulation pop;
  const SurveyTable survey = synth_survey(cfg, seed);

  SampleStats stats;
  std::vector<PreferenceVector> thetas;  // indexed by user_id - 1
  std::vector<int> respondent_of;
  Rng anchor_rng(derive_seed(seed, "anchor"));
  for (const SurveyRow& row : survey.rows) {
    std::vector<Vec> sampled = sample_theta(row, cfg, seed, &stats);
    std::vector<PreferenceVector> full = attach_anchoring(sampled, cfg, anchor_rng);
    for (PreferenceVector& t : full) {
      thetas.push_back(std::move(t));
      respondent_of.push_back(row.respondent_id);
    }
  }

  // Seeded split: shuffle user ids, first n_train train, next n_test test.
  std::vector<int> ids(thetas.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i) + 1;
  {
    Rng rng(derive_seed(seed, "split"));
    for (int i = static_cast<int>(ids.size()) - 1; i > 0; --i) {
      const int j = rng.uniform_int(0, i);
      std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
    }
  }
  std::vector<int> train_ids(ids.begin(), ids.begin() + cfg.n_train);
  std::vector<int> test_ids(ids.begin() + cfg.n_train, ids.begin() + cfg.n_train + cfg.n_test);
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(test_ids.begin(), test_ids.end());

  const int D = cfg.age_bins + 1 + cfg.education_bins + 1 + 1;
  pop.train.d = pop.test.d = static_cast<int>(cfg.theta_mean.size());
  pop.train.D = pop.test.D = D;

  auto build_user = [&](int uid, bool is_test) {
    const PreferenceVector& theta = thetas[static_cast<std::size_t>(uid - 1)];
    UserRecord rec;
    rec.user_id = uid;
    Rng ctx_rng(derive_seed(seed, "context", static_cast<std::uint64_t>(uid)));
    rec.context = gen_user_context(cfg, ctx_rng);
    Rng round_rng(derive_seed(seed, "rounds", static_cast<std::uint64_t>(uid)));
    rec.rounds = gen_rounds(cfg, round_rng, uid);
    Rng policy_rng(derive_seed(seed, "policy", static_cast<std::uint64_t>(uid)));
    Rng choice_rng(derive_seed(seed, "choice", static_cast<std::uint64_t>(uid)));
    std::vector<double> uniforms;
    for (InteractionRound& r : rec.rounds) {
      r.recommended = policy_rng.uniform_int(0, static_cast<int>(r.options.size()) - 1);
      const double u = choice_rng.uniform();
      uniforms.push_back(u);
      r.chosen = gen_choice(theta, r, u, cfg.argmax_choice);
    }
    pop.true_thetas[uid] = theta;
    pop.respondent_of[uid] = respondent_of[static_cast<std::size_t>(uid - 1)];
    if (is_test) pop.choice_u[uid] = std::move(uniforms);
    return rec;
  };

  for (int uid : train_ids) pop.train.users.push_back(build_user(uid, false));
  for (int uid : test_ids) pop.test.users.push_back(build_user(uid, true));

  pop.provenance["seed"] = seed;
  pop.provenance["config"] = {
      {"respondents", cfg.respondents},
      {"samples_per_respondent", cfg.samples_per_respondent},
      {"lambda", cfg.lambda},
      {"theta_mean", cfg.theta_mean},
      {"theta_std", cfg.theta_std},
      {"beta", cfg.beta},
      {"anchor_shape", {cfg.anchor_shape_a, cfg.anchor_shape_b}},
      {"regular_route", cfg.regular_route},
      {"eco_mean", cfg.eco_mean},
      {"eco_std", cfg.eco_std},
      {"T", cfg.T},
      {"n_train", cfg.n_train},
      {"n_test", cfg.n_test},
      {"argmax_choice", cfg.argmax_choice},
  };
  pop.provenance["rejection_sampling"] = {
      {"draws", stats.draws},
      {"accepted", stats.accepted},
      {"acceptance_rate", stats.draws == 0 ? 0.0
                                           : static_cast<double>(stats.accepted) /
                                                 static_cast<double>(stats.draws)},
  };
  pop.provenance["discarded_users"] = total - cfg.n_train - cfg.n_test;
  return pop;
}

}  // namespace prefbandit
