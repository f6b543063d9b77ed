#pragma once

// K-Means over fitted preference vectors with a loss-guided distance:
// dist(i, c) = squared Frobenius distance between the one-hot predictions the
// centroid makes on user i's rounds and the user's actual one-hot choices,
// which is 2 x (number of mismatched rounds). Assignment is argmin with ties
// to the lowest cluster index; centroids are plain means of member vectors.
// A plain-L2 mode over the vectors themselves is kept for comparison.

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefbandit/core.hpp"
#include "prefbandit/ewc.hpp"
#include "prefbandit/noncompliance.hpp"
#include "prefbandit/rng.hpp"

namespace prefbandit {

enum class ClusterMode { loss_guided, plain_l2 };

struct ClusterModel {
  int K = 0;
  ClusterMode mode = ClusterMode::loss_guided;
  ExpertSet centroids;
  std::map<int, int> labels;  // user_id -> cluster index
};

// Centroid predictions use the recommendation recorded in each round.
inline double loss_guided_distance(const PreferenceVector& centroid,
                                   const std::vector<InteractionRound>& rounds) {
  if (rounds.empty()) throw std::invalid_argument("loss_guided_distance: no rounds");
  double dist = 0.0;
  for (const InteractionRound& r : rounds) {
    const Vec u = utilities(centroid, r.options, r.recommended);
    dist += 2.0 * zero_one_loss(argmax_lowest_tie(u), r.chosen);
  }
  return dist;
}

inline double l2_distance_sq(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("l2_distance_sq: length mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

namespace detail {

inline double cluster_distance(const ClusterModel& model, const PreferenceVector& centroid,
                               const PreferenceVector& theta,
                               const std::vector<InteractionRound>& rounds) {
  return model.mode == ClusterMode::loss_guided ? loss_guided_distance(centroid, rounds)
                                                : l2_distance_sq(centroid, theta);
}

}  // namespace detail

namespace detail {

// thetas must be keyed by user_id; every keyed user needs rounds in ds.
// Iteration order is by user_id everywhere, so permuting ds.users changes
// nothing about the resulting partition.
inline ClusterModel cluster_fit_once(const Dataset& ds, const std::map<int, PreferenceVector>& thetas,
                                     int K, ClusterMode mode, std::uint64_t seed,
                                     int max_iters) {
  if (K < 1) throw std::invalid_argument("cluster_fit: K must be >= 1");
  if (static_cast<std::size_t>(K) > thetas.size())
    throw std::invalid_argument("cluster_fit: K exceeds number of users");
  std::map<int, const std::vector<InteractionRound>*> rounds_by_user;
  for (const UserRecord& u : ds.users) rounds_by_user[u.user_id] = &u.rounds;
  std::vector<int> ids;
  for (const auto& [id, theta] : thetas) {
    if (mode == ClusterMode::loss_guided && rounds_by_user.find(id) == rounds_by_user.end())
      throw std::invalid_argument("cluster_fit: no rounds for user " + std::to_string(id));
    ids.push_back(id);
  }

  ClusterModel model;
  model.K = K;
  model.mode = mode;

  // Seed centroids with K distinct users' vectors, drawn from the id-sorted
  // list (partial Fisher-Yates) so the draw is order-independent.
  {
    std::vector<int> pool = ids;
    Rng rng(derive_seed(seed, "kmeans-init"));
    for (int k = 0; k < K; ++k) {
      const int j = rng.uniform_int(k, static_cast<int>(pool.size()) - 1);
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
      model.centroids.push_back(thetas.at(pool[static_cast<std::size_t>(k)]));
    }
  }

  for (int id : ids) model.labels[id] = 0;

  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = (iter == 0);
    for (int id : ids) {
      const PreferenceVector& theta = thetas.at(id);
      const std::vector<InteractionRound>* rounds =
          mode == ClusterMode::loss_guided ? rounds_by_user.at(id) : nullptr;
      int best = 0;
      double best_dist = 0.0;
      for (int k = 0; k < K; ++k) {
        const double dist = mode == ClusterMode::loss_guided
                                ? loss_guided_distance(model.centroids[static_cast<std::size_t>(k)], *rounds)
                                : l2_distance_sq(model.centroids[static_cast<std::size_t>(k)], theta);
        if (k == 0 || dist < best_dist) {  // strict <: ties keep the lowest k
          best = k;
          best_dist = dist;
        }
      }
      if (model.labels[id] != best) changed = true;
      model.labels[id] = best;
    }

    // Empty clusters are reseeded from the member currently farthest from its
    // own centroid (lowest user_id on ties), then everything reassigns.
    std::vector<int> count(static_cast<std::size_t>(K), 0);
    for (int id : ids) ++count[static_cast<std::size_t>(model.labels[id])];
    for (int k = 0; k < K; ++k) {
      if (count[static_cast<std::size_t>(k)] > 0) continue;
      int worst_id = -1;
      double worst_dist = -1.0;
      for (int id : ids) {
        const int own = model.labels[id];
        if (count[static_cast<std::size_t>(own)] <= 1) continue;
        const double dist = detail::cluster_distance(model, model.centroids[static_cast<std::size_t>(own)],
                                                     thetas.at(id),
                                                     mode == ClusterMode::loss_guided ? *rounds_by_user.at(id)
                                                                                      : std::vector<InteractionRound>{});
        if (dist > worst_dist) {
          worst_dist = dist;
          worst_id = id;
        }
      }
      if (worst_id < 0) continue;
      --count[static_cast<std::size_t>(model.labels[worst_id])];
      model.labels[worst_id] = k;
      ++count[static_cast<std::size_t>(k)];
      model.centroids[static_cast<std::size_t>(k)] = thetas.at(worst_id);
      changed = true;
    }

    // Centroid update: mean of member vectors in user_id order.
    std::vector<Vec> sums(static_cast<std::size_t>(K));
    std::vector<int> n(static_cast<std::size_t>(K), 0);
    for (int id : ids) {
      const int k = model.labels[id];
      const PreferenceVector& theta = thetas.at(id);
      if (sums[static_cast<std::size_t>(k)].empty()) sums[static_cast<std::size_t>(k)].assign(theta.size(), 0.0);
      for (std::size_t j = 0; j < theta.size(); ++j) sums[static_cast<std::size_t>(k)][j] += theta[j];
      ++n[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < K; ++k) {
      if (n[static_cast<std::size_t>(k)] == 0) continue;
      for (double& v : sums[static_cast<std::size_t>(k)]) v /= static_cast<double>(n[static_cast<std::size_t>(k)]);
      model.centroids[static_cast<std::size_t>(k)] = sums[static_cast<std::size_t>(k)];
    }

    if (!changed) break;
  }
  return model;
}

inline double cluster_objective(const Dataset& ds, const std::map<int, PreferenceVector>& thetas,
                                const ClusterModel& model) {
  std::map<int, const std::vector<InteractionRound>*> rounds_by_user;
  if (model.mode == ClusterMode::loss_guided)
    for (const UserRecord& u : ds.users) rounds_by_user[u.user_id] = &u.rounds;
  double total = 0.0;
  for (const auto& [id, k] : model.labels) {
    const PreferenceVector& c = model.centroids[static_cast<std::size_t>(k)];
    total += model.mode == ClusterMode::loss_guided
                 ? loss_guided_distance(c, *rounds_by_user.at(id))
                 : l2_distance_sq(c, thetas.at(id));
  }
  return total;
}

}  // namespace detail

// Lloyd iterations from a seeded init; with restarts > 1 the extra runs use
// derived seeds and the partition with the lowest total within-cluster
// distance wins (ties keep the earliest run). restarts = 1 is exactly the
// single seeded run.
inline ClusterModel cluster_fit(const Dataset& ds, const std::map<int, PreferenceVector>& thetas,
                                int K, ClusterMode mode, std::uint64_t seed,
                                int max_iters = 100, int restarts = 1) {
  if (restarts < 1) throw std::invalid_argument("cluster_fit: restarts must be >= 1");
  ClusterModel best;
  double best_obj = 0.0;
  for (int r = 0; r < restarts; ++r) {
    const std::uint64_t run_seed =
        r == 0 ? seed : derive_seed(seed, "kmeans-restart", static_cast<std::uint64_t>(r));
    ClusterModel model = detail::cluster_fit_once(ds, thetas, K, mode, run_seed, max_iters);
    const double obj = detail::cluster_objective(ds, thetas, model);
    if (r == 0 || obj < best_obj) {
      best = std::move(model);
      best_obj = obj;
    }
  }
  return best;
}

struct SelectKResult {
  int best_k = 0;
  std::map<int, double> score_by_k;  // cumulative 0-1 loss of the replayed run
};

// Scores each candidate K by running the whole pipeline on the training set
// (fit once, cluster per K, warm-start per K, then a Hedge replay over the
// training users' own rounds) and keeps the K with the lowest cumulative
// loss; ties go to the smallest K.
inline SelectKResult select_k(const Dataset& train, const std::vector<int>& candidates,
                              const FitConfig& fit_cfg, double eta, std::uint64_t seed) {
  if (candidates.empty()) throw std::invalid_argument("select_k: no candidates");
  FitReport report = fit_population(train, fit_cfg, derive_seed(seed, "selectk-fit"));
  std::map<int, PreferenceVector> thetas = fitted_thetas(report);
  if (thetas.empty()) throw std::invalid_argument("select_k: no usable fits");

  SelectKResult result;
  for (int K : candidates) {
    ClusterModel model = cluster_fit(train, thetas, K, ClusterMode::loss_guided,
                                     derive_seed(seed, "selectk-cluster", static_cast<std::uint64_t>(K)));
    std::vector<UserContext> contexts;
    std::vector<int> labels;
    for (const UserRecord& u : train.users) {
      auto it = model.labels.find(u.user_id);
      if (it == model.labels.end()) continue;
      contexts.push_back(u.context);
      labels.push_back(it->second);
    }
    ContextWarmStart warm = warm_start_fit(contexts, labels, K,
                                           derive_seed(seed, "selectk-warm", static_cast<std::uint64_t>(K)));

    double cumulative = 0.0;
    Rng rng(derive_seed(seed, "selectk-replay", static_cast<std::uint64_t>(K)));
    for (const UserRecord& u : train.users) {
      if (model.labels.find(u.user_id) == model.labels.end()) continue;
      Vec w = init_user_weights(&warm, u.context, K);
      for (const InteractionRound& r : u.rounds) {
        const EwcRecommendation rec = ewc_recommend(w, model.centroids, r.options, rng, true);
        cumulative += zero_one_loss(rec.option, r.chosen);
        InteractionRound realized = r;
        realized.recommended = rec.option;
        w = ewc_observe(w, model.centroids, realized, eta);
      }
    }
    result.score_by_k[K] = cumulative;
  }

  result.best_k = result.score_by_k.begin()->first;
  for (const auto& [K, score] : result.score_by_k)
    if (score < result.score_by_k.at(result.best_k)) result.best_k = K;
  return result;
}

}  // namespace prefbandit
