#pragma once

// Experiment orchestration: offline pipeline + online round-robin evaluation,
// regret-bound calculators, the sample-complexity probe, and file emission
// (long/mean CSV curves, an SVG chart, a JSON summary).
//
// Regret accounting. With generator truth available (travel), the per-round
// increment is
//     loss(issued recommendation, choice) - loss(truth-optimal recommendation, choice)
// which lies in {-1, 0, 1}; without truth (restaurant replay) it is the raw
// 0-1 loss of the issued recommendation. Raw-loss curves are emitted in both
// cases so the two readings can be compared.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefbandit/baselines.hpp"
#include "prefbandit/clustering.hpp"
#include "prefbandit/core.hpp"
#include "prefbandit/dataset_json.hpp"
#include "prefbandit/entree.hpp"
#include "prefbandit/ewc.hpp"
#include "prefbandit/noncompliance.hpp"
#include "prefbandit/rng.hpp"
#include "prefbandit/simgen.hpp"

namespace prefbandit {

// ---------------------------------------------------------------------------
// Small statistics helpers.

namespace stats {

// Regularized incomplete gamma P(a, x) by series, Q(a, x) by continued
// fraction; the usual split at x = a + 1.
inline double gamma_p_series(double a, double x) {
  double sum = 1.0 / a, term = sum, ap = a;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_contfrac(a, x);
}

// Survival function of the chi-square distribution.
inline double chi2_sf(double x, int dof) {
  if (dof < 1) throw std::invalid_argument("chi2_sf: dof must be >= 1");
  if (x <= 0.0) return 1.0;
  return gamma_q(static_cast<double>(dof) / 2.0, x / 2.0);
}

// Pearson chi-square independence test over a contingency table.
// Returns the p-value; cells with empty marginals contribute no dof.
inline double chi2_independence_p(const std::vector<std::vector<long long>>& table) {
  const std::size_t R = table.size();
  if (R == 0) throw std::invalid_argument("chi2_independence_p: empty table");
  const std::size_t C = table.front().size();
  std::vector<double> row(R, 0.0), col(C, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < R; ++i) {
    if (table[i].size() != C) throw std::invalid_argument("chi2_independence_p: ragged table");
    for (std::size_t j = 0; j < C; ++j) {
      row[i] += static_cast<double>(table[i][j]);
      col[j] += static_cast<double>(table[i][j]);
      total += static_cast<double>(table[i][j]);
    }
  }
  if (total <= 0.0) throw std::invalid_argument("chi2_independence_p: empty counts");
  int nonzero_rows = 0, nonzero_cols = 0;
  for (double v : row)
    if (v > 0.0) ++nonzero_rows;
  for (double v : col)
    if (v > 0.0) ++nonzero_cols;
  const int dof = (nonzero_rows - 1) * (nonzero_cols - 1);
  if (dof < 1) return 1.0;
  double x2 = 0.0;
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) {
      const double expect = row[i] * col[j] / total;
      if (expect <= 0.0) continue;
      const double diff = static_cast<double>(table[i][j]) - expect;
      x2 += diff * diff / expect;
    }
  return chi2_sf(x2, dof);
}

}  // namespace stats

// ---------------------------------------------------------------------------
// Regret-bound calculators. Natural logarithms throughout (the log-base
// convention is noted in emitted reports).

inline double bound_ewc(double N, double T, double K, double l_centroids) {
  if (N < 1.0 || T < 1.0 || K < 1.0 || l_centroids < 0.0)
    throw std::invalid_argument("bound_ewc: arguments out of range");
  return 2.0 * N * std::sqrt(T * std::log(K)) + T * N * l_centroids;
}

// C * N * sqrt(T d ln^3(A T ln(T) / delta)). Undefined (treated as +inf)
// where the inner logarithm is not positive, e.g. T = 1.
inline double bound_linucb(double N, double T, double d, double A, double C, double delta) {
  if (N < 1.0 || T < 1.0 || d < 1.0 || A < 2.0 || C <= 0.0 || delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("bound_linucb: arguments out of range");
  const double lnT = std::log(T);
  if (lnT <= 0.0) return std::numeric_limits<double>::infinity();
  const double arg = A * T * lnT / delta;
  const double ln_arg = std::log(arg);
  if (ln_arg <= 0.0) return std::numeric_limits<double>::infinity();
  return C * N * std::sqrt(T * d * ln_arg * ln_arg * ln_arg);
}

struct BoundComparePoint {
  double T = 0.0;
  double ewc = 0.0;
  double linucb = 0.0;
  std::string winner;  // "ewc" | "linucb" | "tie"
};

struct BoundCompareResult {
  double threshold = 0.0;        // ((C-2)/l)^2
  bool crossed = false;
  double crossover_T = 0.0;      // first grid T where the LinUCB bound is lower
  std::vector<BoundComparePoint> table;
};

inline BoundCompareResult bound_compare(double N, const std::vector<double>& T_grid, double K,
                                        double A, double d, double l_centroids, double C,
                                        double delta) {
  if (T_grid.empty()) throw std::invalid_argument("bound_compare: empty T grid");
  if (l_centroids <= 0.0) throw std::invalid_argument("bound_compare: l_centroids must be positive");
  BoundCompareResult result;
  result.threshold = ((C - 2.0) / l_centroids) * ((C - 2.0) / l_centroids);
  for (double T : T_grid) {
    BoundComparePoint p;
    p.T = T;
    p.ewc = bound_ewc(N, T, K, l_centroids);
    p.linucb = bound_linucb(N, T, d, A, C, delta);
    p.winner = p.linucb < p.ewc ? "linucb" : (p.ewc < p.linucb ? "ewc" : "tie");
    if (p.winner == "linucb" && !result.crossed) {
      result.crossed = true;
      result.crossover_T = T;
    }
    result.table.push_back(p);
  }
  return result;
}

// Expected squared centroid displacement under a Gaussian-mixture population:
//   L*eps*sigma^2/(4N) + (L/4)*(eps+2)*sum_k pi_k trace(Sigma_k)
inline double gmm_l_centroids(double L, double eps, double sigma2, double N,
                              const std::vector<double>& pis, const std::vector<double>& traces) {
  if (pis.size() != traces.size() || pis.empty())
    throw std::invalid_argument("gmm_l_centroids: pis/traces mismatch");
  if (L < 0.0 || eps < 0.0 || sigma2 < 0.0 || N < 1.0)
    throw std::invalid_argument("gmm_l_centroids: arguments out of range");
  double pi_sum = 0.0, weighted = 0.0;
  for (std::size_t k = 0; k < pis.size(); ++k) {
    if (pis[k] < 0.0 || traces[k] < 0.0)
      throw std::invalid_argument("gmm_l_centroids: negative weight or trace");
    pi_sum += pis[k];
    weighted += pis[k] * traces[k];
  }
  if (std::fabs(pi_sum - 1.0) > 1e-6)
    throw std::invalid_argument("gmm_l_centroids: mixture weights must sum to 1");
  return L * eps * sigma2 / (4.0 * N) + 0.25 * L * (eps + 2.0) * weighted;
}

// Empirical Lipschitz estimate for the prediction map: the largest ratio of
// prediction distance (Frobenius norm over a user's rounds, historical
// recommendation applied) to parameter distance over sampled vector pairs.
inline double estimate_lipschitz(const Dataset& ds, const std::vector<PreferenceVector>& thetas,
                                 int n_pairs, std::uint64_t seed) {
  if (thetas.size() < 2) throw std::invalid_argument("estimate_lipschitz: need at least 2 vectors");
  Rng rng(derive_seed(seed, "lipschitz"));
  double best = 0.0;
  for (int p = 0; p < n_pairs; ++p) {
    const int i = rng.uniform_int(0, static_cast<int>(thetas.size()) - 1);
    int j = rng.uniform_int(0, static_cast<int>(thetas.size()) - 2);
    if (j >= i) ++j;
    const double dt = std::sqrt(l2_distance_sq(thetas[static_cast<std::size_t>(i)],
                                               thetas[static_cast<std::size_t>(j)]));
    if (dt <= 0.0) continue;
    for (const UserRecord& u : ds.users) {
      double sq = 0.0;
      for (const InteractionRound& r : u.rounds) {
        const int a = argmax_lowest_tie(utilities(thetas[static_cast<std::size_t>(i)], r.options, r.recommended));
        const int b = argmax_lowest_tie(utilities(thetas[static_cast<std::size_t>(j)], r.options, r.recommended));
        sq += 2.0 * zero_one_loss(a, b);
      }
      best = std::max(best, std::sqrt(sq) / dt);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Sample-complexity probe for the two-option model: planted direction on the
// unit sphere, standard normal contexts, labels from sigmoid(signal_gain *
// <x, theta*>); reports the mean distance between the normalized fitted
// direction and the planted one per horizon.

struct ProbeResult {
  std::map<int, double> mean_error_by_T;
};

inline ProbeResult sample_complexity_probe(int d, const std::vector<int>& T_grid, int trials,
                                           std::uint64_t seed, double signal_gain = 50.0,
                                           FitConfig fit_cfg = FitConfig{}) {
  if (d < 1 || trials < 1 || T_grid.empty())
    throw std::invalid_argument("sample_complexity_probe: bad arguments");
  ProbeResult result;
  for (int T : T_grid) {
    if (T < 1) throw std::invalid_argument("sample_complexity_probe: T must be >= 1");
    double err_sum = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
      Rng rng(derive_seed(seed, "probe", static_cast<std::uint64_t>(T),
                          static_cast<std::uint64_t>(trial)));
      Vec star(static_cast<std::size_t>(d));
      double norm = 0.0;
      do {
        for (double& v : star) v = rng.normal();
        norm = std::sqrt(dot(star, star));
      } while (norm < 1e-9);
      for (double& v : star) v /= norm;

      std::vector<InteractionRound> rounds;
      for (int t = 0; t < T; ++t) {
        InteractionRound r;
        r.user_id = 1;
        r.round_index = t + 1;
        Vec x(static_cast<std::size_t>(d));
        for (double& v : x) v = rng.normal();
        r.options.push_back({x});
        r.options.push_back({Vec(static_cast<std::size_t>(d), 0.0)});
        r.recommended = rng.uniform_int(0, 1);
        const double p0 = 1.0 / (1.0 + std::exp(-signal_gain * dot(x, star)));
        r.chosen = rng.uniform() < p0 ? 0 : 1;
        rounds.push_back(std::move(r));
      }
      const FitOutcome fo = fit_user(rounds, fit_cfg,
                                     derive_seed(seed, "probe-init", static_cast<std::uint64_t>(T),
                                                 static_cast<std::uint64_t>(trial)));
      if (!fo.ok) {
        err_sum += 2.0;  // worst case on the sphere
        continue;
      }
      Vec dir(fo.theta.begin(), fo.theta.end() - 1);
      const double dn = std::sqrt(dot(dir, dir));
      if (dn < 1e-12) {
        err_sum += 2.0;
        continue;
      }
      for (double& v : dir) v /= dn;
      double sq = 0.0;
      for (int j = 0; j < d; ++j) {
        const double diff = dir[static_cast<std::size_t>(j)] - star[static_cast<std::size_t>(j)];
        sq += diff * diff;
      }
      err_sum += std::sqrt(sq);
    }
    result.mean_error_by_T[T] = err_sum / static_cast<double>(trials);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Experiment configuration and runner.

struct ExperimentConfig {
  std::string scenario = "travel";  // "travel" | "restaurant"
  std::vector<std::string> algorithms = {"ewc", "linucb", "dynucb", "noncompliance_only"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int K = 6;           // expert count (travel default; restaurant default 8)
  double eta = 1.0;
  double alpha = 0.05;
  double ridge = 1.0;
  FitConfig fit;       // one fitting procedure, used offline and online
  bool sample_expert = true;
  GenConfig gen;       // travel generator (gen.beta is overridden by `beta`)
  double beta = 0.0;
  std::string sessions_dir;      // restaurant raw logs
  int n_train_users = 188;       // restaurant split
  int n_test_users = 75;
  std::string out_dir = "out";
};

struct ExperimentResult {
  std::string scenario;
  std::vector<std::string> algorithms;
  std::vector<std::uint64_t> seeds;
  // curves[algorithm][seed]: cumulative regret at each global round
  std::map<std::string, std::map<std::uint64_t, Vec>> curves;      // primary mode
  std::map<std::string, std::map<std::uint64_t, Vec>> raw_curves;  // plain cumulative loss
  nlohmann::ordered_json metadata;
};

inline double final_mean_regret(const ExperimentResult& r, const std::string& algorithm,
                                bool raw = false) {
  const auto& source = raw ? r.raw_curves : r.curves;
  auto it = source.find(algorithm);
  if (it == source.end() || it->second.empty())
    throw std::invalid_argument("final_mean_regret: no curves for " + algorithm);
  double sum = 0.0;
  for (const auto& [seed, curve] : it->second) sum += curve.empty() ? 0.0 : curve.back();
  return sum / static_cast<double>(it->second.size());
}

inline Vec seed_mean_curve(const std::map<std::uint64_t, Vec>& by_seed) {
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto& [seed, curve] : by_seed) len = std::min(len, curve.size());
  if (by_seed.empty() || len == std::numeric_limits<std::size_t>::max()) return {};
  Vec mean(len, 0.0);
  for (const auto& [seed, curve] : by_seed)
    for (std::size_t i = 0; i < len; ++i) mean[i] += curve[i];
  for (double& v : mean) v /= static_cast<double>(by_seed.size());
  return mean;
}

namespace detail {

struct OfflineArtifacts {
  std::map<int, PreferenceVector> thetas;
  ClusterModel clusters;
  ContextWarmStart warm;
  bool has_plain = false;
  ClusterModel clusters_plain;
  ContextWarmStart warm_plain;
  int fit_failures = 0;
};

inline OfflineArtifacts offline_pipeline(const Dataset& train, const ExperimentConfig& cfg,
                                         std::uint64_t seed, bool need_plain) {
  OfflineArtifacts art;
  FitReport fr = fit_population(train, cfg.fit, derive_seed(seed, "offline-fit"));
  art.fit_failures = fr.failures;
  art.thetas = fitted_thetas(fr);
  art.clusters = cluster_fit(train, art.thetas, cfg.K, ClusterMode::loss_guided,
                             derive_seed(seed, "cluster"));
  std::vector<UserContext> contexts;
  std::vector<int> labels;
  for (const UserRecord& u : train.users) {
    auto it = art.clusters.labels.find(u.user_id);
    if (it == art.clusters.labels.end()) continue;
    contexts.push_back(u.context);
    labels.push_back(it->second);
  }
  art.warm = warm_start_fit(contexts, labels, cfg.K, derive_seed(seed, "warm"));

  if (need_plain) {
    FitConfig plain_cfg = cfg.fit;
    plain_cfg.model_recommendation = false;
    FitReport fr2 = fit_population(train, plain_cfg, derive_seed(seed, "offline-fit-plain"));
    std::map<int, PreferenceVector> thetas2 = fitted_thetas(fr2);
    art.clusters_plain = cluster_fit(train, thetas2, cfg.K, ClusterMode::loss_guided,
                                     derive_seed(seed, "cluster-plain"));
    std::vector<UserContext> c2;
    std::vector<int> l2;
    for (const UserRecord& u : train.users) {
      auto it = art.clusters_plain.labels.find(u.user_id);
      if (it == art.clusters_plain.labels.end()) continue;
      c2.push_back(u.context);
      l2.push_back(it->second);
    }
    art.warm_plain = warm_start_fit(c2, l2, cfg.K, derive_seed(seed, "warm-plain"));
    art.has_plain = true;
  }
  return art;
}

inline bool wants(const std::vector<std::string>& algorithms, const std::string& name) {
  return std::find(algorithms.begin(), algorithms.end(), name) != algorithms.end();
}

}  // namespace detail

// Travel: regenerate the population per seed, run the offline pipeline, then
// evaluate all algorithms online round-robin (user-major inside each round).
// Every algorithm sees identical option contexts and user ordering; choices
// are drawn through per-(user, round) common uniforms, so feedback differs
// only where recommendations differ.
inline void run_travel_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                            ExperimentResult& result) {
  GenConfig gen = cfg.gen;
  gen.beta = cfg.beta;
  const TravelPopulation pop = build_population(gen, seed);
  const bool need_plain = detail::wants(cfg.algorithms, "without_noncompliance");
  const detail::OfflineArtifacts art = detail::offline_pipeline(pop.train, cfg, seed, need_plain);

  LearnerAssets assets;
  assets.d = pop.test.d;
  assets.D = pop.test.D;
  for (const UserRecord& u : pop.test.users) assets.contexts[u.user_id] = u.context;
  assets.experts = art.clusters.centroids;
  assets.warm = &art.warm;
  if (art.has_plain) {
    assets.experts_plain = art.clusters_plain.centroids;
    assets.warm_plain = &art.warm_plain;
  }
  assets.eta = cfg.eta;
  assets.alpha = cfg.alpha;
  assets.ridge = cfg.ridge;
  assets.dynucb_clusters = cfg.K;
  assets.online_fit = cfg.fit;
  assets.sample_expert = cfg.sample_expert;
  for (const UserRecord& u : pop.test.users) assets.true_thetas[u.user_id] = pop.true_thetas.at(u.user_id);
  // Precise clustering for the oracle ablation: assign each held-out user to
  // the expert that disagrees least with the user's true preference at
  // recommendation time, measured over the offline option sets. This is the
  // clustering's own loss-guided criterion with the truth standing in for
  // observed history; plain L2 would be dominated by the anchoring weight,
  // which recommendations never see.
  {
    std::vector<const std::vector<OptionContext>*> ref;
    for (const UserRecord& tu : pop.train.users)
      for (const InteractionRound& r : tu.rounds) ref.push_back(&r.options);
    const int K = art.clusters.K;
    std::vector<std::vector<int>> expert_pick(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      expert_pick[static_cast<std::size_t>(k)].reserve(ref.size());
      const PreferenceVector& c = art.clusters.centroids[static_cast<std::size_t>(k)];
      for (const auto* options : ref)
        expert_pick[static_cast<std::size_t>(k)].push_back(
            argmax_lowest_tie(utilities(c, *options, std::nullopt)));
    }
    for (const UserRecord& u : pop.test.users) {
      const PreferenceVector& truth = pop.true_thetas.at(u.user_id);
      std::vector<long long> disagree(static_cast<std::size_t>(K), 0);
      for (std::size_t j = 0; j < ref.size(); ++j) {
        const int want = argmax_lowest_tie(utilities(truth, *ref[j], std::nullopt));
        for (int k = 0; k < K; ++k)
          disagree[static_cast<std::size_t>(k)] += (expert_pick[static_cast<std::size_t>(k)][j] != want);
      }
      int best = 0;
      for (int k = 1; k < K; ++k)
        if (disagree[static_cast<std::size_t>(k)] < disagree[static_cast<std::size_t>(best)]) best = k;
      assets.true_labels[u.user_id] = best;
    }
  }

  std::vector<std::unique_ptr<Learner>> learners;
  for (const std::string& name : cfg.algorithms)
    learners.push_back(make_learner(name, assets, derive_seed(seed, "learner-" + name)));

  std::map<std::string, Vec*> curve_of, raw_of;
  for (const std::string& name : cfg.algorithms) {
    curve_of[name] = &result.curves[name][seed];
    raw_of[name] = &result.raw_curves[name][seed];
  }
  std::map<std::string, double> cum, cum_raw;

  for (int t = 0; t < gen.T; ++t) {
    for (const UserRecord& u : pop.test.users) {
      const InteractionRound& base = u.rounds[static_cast<std::size_t>(t)];
      const PreferenceVector& truth = pop.true_thetas.at(u.user_id);
      const int oracle_rec = argmax_lowest_tie(utilities(truth, base.options, std::nullopt));
      const double u01 = pop.choice_u.at(u.user_id)[static_cast<std::size_t>(t)];
      for (std::size_t li = 0; li < learners.size(); ++li) {
        Learner& learner = *learners[li];
        const int rec = learner.act(u.user_id, base.options);
        InteractionRound realized = base;
        realized.recommended = rec;
        realized.chosen = gen_choice(truth, realized, u01, gen.argmax_choice);
        learner.learn(realized);
        const double loss = zero_one_loss(rec, realized.chosen);
        const double oracle_loss = zero_one_loss(oracle_rec, realized.chosen);
        const std::string& name = cfg.algorithms[li];
        cum[name] += loss - oracle_loss;
        cum_raw[name] += loss;
        curve_of[name]->push_back(cum[name]);
        raw_of[name]->push_back(cum_raw[name]);
      }
    }
  }
}

// Restaurant: split the ingested logs per seed, fit offline on the training
// side, then replay the held-out users round-robin. Choices are historical;
// regret is the raw 0-1 loss of the issued recommendation.
inline void run_restaurant_seed(const Dataset& full, const ExperimentConfig& cfg,
                                std::uint64_t seed, ExperimentResult& result) {
  const auto [train, test] = split_users(full, cfg.n_train_users, cfg.n_test_users,
                                         derive_seed(seed, "split"));
  const bool need_plain = detail::wants(cfg.algorithms, "without_noncompliance");
  const detail::OfflineArtifacts art = detail::offline_pipeline(train, cfg, seed, need_plain);

  LearnerAssets assets;
  assets.d = full.d;
  assets.D = full.D;
  for (const UserRecord& u : test.users) assets.contexts[u.user_id] = u.context;
  assets.experts = art.clusters.centroids;
  assets.warm = &art.warm;
  if (art.has_plain) {
    assets.experts_plain = art.clusters_plain.centroids;
    assets.warm_plain = &art.warm_plain;
  }
  assets.eta = cfg.eta;
  assets.alpha = cfg.alpha;
  assets.ridge = cfg.ridge;
  assets.dynucb_clusters = cfg.K;
  assets.online_fit = cfg.fit;
  assets.sample_expert = cfg.sample_expert;

  std::vector<std::unique_ptr<Learner>> learners;
  for (const std::string& name : cfg.algorithms)
    learners.push_back(make_learner(name, assets, derive_seed(seed, "learner-" + name)));

  std::map<std::string, Vec*> curve_of, raw_of;
  for (const std::string& name : cfg.algorithms) {
    curve_of[name] = &result.curves[name][seed];
    raw_of[name] = &result.raw_curves[name][seed];
  }
  std::map<std::string, double> cum;

  std::size_t max_T = 0;
  for (const UserRecord& u : test.users) max_T = std::max(max_T, u.rounds.size());
  for (std::size_t t = 0; t < max_T; ++t) {
    for (const UserRecord& u : test.users) {
      if (t >= u.rounds.size()) continue;
      const InteractionRound& base = u.rounds[t];
      for (std::size_t li = 0; li < learners.size(); ++li) {
        Learner& learner = *learners[li];
        const int rec = learner.act(u.user_id, base.options);
        InteractionRound realized = base;
        realized.recommended = rec;  // chosen stays historical
        learner.learn(realized);
        const std::string& name = cfg.algorithms[li];
        cum[name] += zero_one_loss(rec, realized.chosen);
        curve_of[name]->push_back(cum[name]);
        raw_of[name]->push_back(cum[name]);
      }
    }
  }
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const Dataset* restaurant_data = nullptr) {
  if (cfg.algorithms.empty()) throw std::invalid_argument("run_experiment: no algorithms");
  if (cfg.seeds.empty()) throw std::invalid_argument("run_experiment: no seeds");
  ExperimentResult result;
  result.scenario = cfg.scenario;
  result.algorithms = cfg.algorithms;
  result.seeds = cfg.seeds;

  Dataset ingested;
  const Dataset* rest = restaurant_data;
  if (cfg.scenario == "restaurant" && rest == nullptr) {
    if (cfg.sessions_dir.empty())
      throw std::invalid_argument("run_experiment: restaurant scenario needs sessions_dir");
    IngestLog log;
    ingested = ingest_directory(cfg.sessions_dir, log);
    rest = &ingested;
  }

  for (std::uint64_t seed : cfg.seeds) {
    if (cfg.scenario == "travel") {
      run_travel_seed(cfg, seed, result);
    } else if (cfg.scenario == "restaurant") {
      run_restaurant_seed(*rest, cfg, seed, result);
    } else {
      throw std::invalid_argument("run_experiment: unknown scenario " + cfg.scenario);
    }
  }

  result.metadata["scenario"] = cfg.scenario;
  result.metadata["beta"] = cfg.beta;
  result.metadata["K"] = cfg.K;
  result.metadata["eta"] = cfg.eta;
  result.metadata["alpha"] = cfg.alpha;
  result.metadata["seeds"] = cfg.seeds;
  result.metadata["algorithms"] = cfg.algorithms;
  result.metadata["regret_mode"] = cfg.scenario == "travel" ? "truth-relative" : "raw-loss";
  return result;
}

// ---------------------------------------------------------------------------
// Output emission. Everything is rendered to memory first and written in one
// pass at the end, so a failed run leaves no partial files behind.

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline const std::vector<std::string>& svg_palette() {
  static const std::vector<std::string> colors = {
      "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors;
}

}  // namespace detail

// Self-contained SVG line chart of the seed-averaged curves.
inline std::string render_svg(const ExperimentResult& result) {
  const int W = 840, H = 520, ml = 70, mr = 190, mt = 40, mb = 50;
  const int plot_w = W - ml - mr, plot_h = H - mt - mb;

  std::map<std::string, Vec> means;
  std::size_t n = 0;
  double ymin = 0.0, ymax = 0.0;
  for (const std::string& name : result.algorithms) {
    Vec m = seed_mean_curve(result.curves.at(name));
    n = std::max(n, m.size());
    for (double v : m) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
    means[name] = std::move(m);
  }
  if (ymax == ymin) ymax = ymin + 1.0;
  const double xspan = n > 1 ? static_cast<double>(n - 1) : 1.0;

  auto px = [&](std::size_t i) { return ml + static_cast<double>(i) / xspan * plot_w; };
  auto py = [&](double v) { return mt + (ymax - v) / (ymax - ymin) * plot_h; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">Cumulative regret (" << result.scenario << ", seed mean)</text>\n";

  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w << "\" y2=\""
      << mt + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + plot_h
      << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 5; ++tick) {
    const double frac = static_cast<double>(tick) / 5.0;
    const double x = ml + frac * plot_w;
    const double yv = ymin + frac * (ymax - ymin);
    const double y = py(yv);
    svg << "<line x1=\"" << x << "\" y1=\"" << mt + plot_h << "\" x2=\"" << x << "\" y2=\""
        << mt + plot_h + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << mt + plot_h + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << static_cast<long long>(frac * xspan) + 1 << "</text>\n";
    svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\"" << y
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml - 9 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << detail::fmt_double(yv) << "</text>\n";
  }
  svg << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">round</text>\n";

  int ci = 0;
  for (const std::string& name : result.algorithms) {
    const Vec& m = means.at(name);
    const std::string& color = detail::svg_palette()[static_cast<std::size_t>(ci) %
                                                     detail::svg_palette().size()];
    if (!m.empty()) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      const std::size_t step = std::max<std::size_t>(1, m.size() / 600);
      for (std::size_t i = 0; i < m.size(); i += step) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(i), py(m[i]));
        svg << buf;
      }
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f", px(m.size() - 1), py(m.back()));
      svg << buf << "\"/>\n";
    }
    const int ly = mt + 18 * ci;
    svg << "<rect x=\"" << ml + plot_w + 14 << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\""
        << color << "\"/>\n";
    svg << "<text x=\"" << ml + plot_w + 32 << "\" y=\"" << ly + 10
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << name << "</text>\n";
    ++ci;
  }
  svg << "</svg>\n";
  return svg.str();
}

inline void emit_outputs(const ExperimentResult& result, const std::string& out_dir) {
  std::vector<std::pair<std::string, std::string>> files;

  auto long_csv = [&](const std::map<std::string, std::map<std::uint64_t, Vec>>& curves) {
    std::string csv = "scenario,algorithm,seed,round,cumulative_regret\n";
    std::size_t rows = 0;
    for (const auto& [name, by_seed] : curves)
      for (const auto& [seed, curve] : by_seed) rows += curve.size();
    csv.reserve(csv.size() + rows * 48);
    for (const std::string& name : result.algorithms) {
      for (const auto& [seed, curve] : curves.at(name)) {
        for (std::size_t i = 0; i < curve.size(); ++i) {
          csv += result.scenario;
          csv += ',';
          csv += name;
          csv += ',';
          csv += std::to_string(seed);
          csv += ',';
          csv += std::to_string(i + 1);
          csv += ',';
          csv += detail::fmt_double(curve[i]);
          csv += '\n';
        }
      }
    }
    return csv;
  };

  auto mean_csv = [&](const std::map<std::string, std::map<std::uint64_t, Vec>>& curves) {
    std::string csv = "scenario,algorithm,round,mean_cumulative_regret\n";
    for (const std::string& name : result.algorithms) {
      const Vec m = seed_mean_curve(curves.at(name));
      for (std::size_t i = 0; i < m.size(); ++i) {
        csv += result.scenario;
        csv += ',';
        csv += name;
        csv += ',';
        csv += std::to_string(i + 1);
        csv += ',';
        csv += detail::fmt_double(m[i]);
        csv += '\n';
      }
    }
    return csv;
  };

  files.emplace_back("curves_long.csv", long_csv(result.curves));
  files.emplace_back("curves_mean.csv", mean_csv(result.curves));
  files.emplace_back("curves_long_rawloss.csv", long_csv(result.raw_curves));
  files.emplace_back("curves_mean_rawloss.csv", mean_csv(result.raw_curves));
  files.emplace_back("regret_curves.svg", render_svg(result));

  nlohmann::ordered_json summary;
  summary["scenario"] = result.scenario;
  summary["metadata"] = result.metadata;
  summary["final_mean_regret"] = nlohmann::ordered_json::object();
  summary["final_mean_regret_rawloss"] = nlohmann::ordered_json::object();
  for (const std::string& name : result.algorithms) {
    summary["final_mean_regret"][name] = final_mean_regret(result, name, false);
    summary["final_mean_regret_rawloss"][name] = final_mean_regret(result, name, true);
  }
  files.emplace_back("summary.json", summary.dump(1) + "\n");

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("emit_outputs: cannot create " + out_dir + ": " + ec.message());
  for (const auto& [name, content] : files) {
    const std::string path = (fs::path(out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_outputs: cannot open " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("emit_outputs: short write to " + path);
  }
}

}  // namespace prefbandit
