#pragma once

// Expert-weighted consensus over clustered preference vectors.
//
// Offline, a population of fitted preference vectors is clustered; the
// centroids act as a fixed expert set. Online, each user carries a Hedge
// weight vector over the experts: an expert is drawn, its utility argmax is
// recommended (indicator off at recommendation time), and after the user's
// actual choice is seen every expert is charged 0-1 loss for what it would
// have predicted under the recommendation that was in fact issued.
//
// Warm start: a multinomial logistic classifier from user context to cluster
// membership supplies the initial weights; without it they are uniform.

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefbandit/core.hpp"
#include "prefbandit/rng.hpp"

namespace prefbandit {

using ExpertSet = std::vector<PreferenceVector>;

// w'_k = w_k * exp(-eta * l_k), renormalized.
inline Vec hedge_update(const Vec& weights, const Vec& losses, double eta) {
  if (weights.size() != losses.size())
    throw std::invalid_argument("hedge_update: weight/loss length mismatch");
  if (weights.empty()) throw std::invalid_argument("hedge_update: empty weights");
  Vec w(weights.size());
  double z = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    check_finite(losses[k], "hedge_update");
    w[k] = weights[k] * std::exp(-eta * losses[k]);
    z += w[k];
  }
  if (!(z > 0.0))
    throw std::domain_error("hedge_update: all weights vanished (unbounded losses?)");
  for (double& v : w) v /= z;
  return w;
}

// Multinomial logistic map from user context to cluster membership.
// W is K rows of D+1 weights; the trailing column is the bias.
struct ContextWarmStart {
  int K = 0;
  int D = 0;
  std::vector<Vec> W;

  Vec predict(const UserContext& u) const {
    if (static_cast<int>(u.features.size()) != D)
      throw std::invalid_argument("warm start predict: context dimension mismatch");
    Vec logits(static_cast<std::size_t>(K), 0.0);
    for (int k = 0; k < K; ++k) {
      double s = W[static_cast<std::size_t>(k)][static_cast<std::size_t>(D)];
      for (int j = 0; j < D; ++j)
        s += W[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] * u.features[static_cast<std::size_t>(j)];
      logits[static_cast<std::size_t>(k)] = s;
    }
    return softmax(logits);
  }
};

// Cross-entropy fit by full-batch gradient descent, unregularized.
// All-one-class input short-circuits to a saturated classifier: plain descent
// closes the last probability gap only at ~1/epochs and would never reach it.
inline ContextWarmStart warm_start_fit(const std::vector<UserContext>& contexts,
                                       const std::vector<int>& labels, int K,
                                       std::uint64_t seed,
                                       double learning_rate = 0.5,
                                       int max_epochs = 500,
                                       double param_tolerance = 1e-6) {
  if (contexts.size() != labels.size() || contexts.empty())
    throw std::invalid_argument("warm_start_fit: contexts/labels mismatch or empty");
  if (K < 1) throw std::invalid_argument("warm_start_fit: K must be >= 1");
  const int D = static_cast<int>(contexts.front().features.size());
  for (const UserContext& u : contexts)
    if (static_cast<int>(u.features.size()) != D)
      throw std::invalid_argument("warm_start_fit: ragged context dimensions");
  for (int y : labels)
    if (y < 0 || y >= K) throw std::invalid_argument("warm_start_fit: label out of range");

  ContextWarmStart ws;
  ws.K = K;
  ws.D = D;
  ws.W.assign(static_cast<std::size_t>(K), Vec(static_cast<std::size_t>(D) + 1, 0.0));

  bool degenerate = true;
  for (int y : labels)
    if (y != labels.front()) { degenerate = false; break; }
  if (degenerate) {
    ws.W[static_cast<std::size_t>(labels.front())][static_cast<std::size_t>(D)] = 40.0;
    return ws;
  }

  Rng rng(seed);
  for (Vec& row : ws.W)
    for (double& v : row) v = rng.normal(0.0, 0.1);

  const double invN = 1.0 / static_cast<double>(contexts.size());
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    std::vector<Vec> grad(static_cast<std::size_t>(K), Vec(static_cast<std::size_t>(D) + 1, 0.0));
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      Vec p = ws.predict(contexts[i]);
      p[static_cast<std::size_t>(labels[i])] -= 1.0;
      for (int k = 0; k < K; ++k) {
        for (int j = 0; j < D; ++j)
          grad[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] +=
              p[static_cast<std::size_t>(k)] * contexts[i].features[static_cast<std::size_t>(j)];
        grad[static_cast<std::size_t>(k)][static_cast<std::size_t>(D)] += p[static_cast<std::size_t>(k)];
      }
    }
    double max_step = 0.0;
    for (int k = 0; k < K; ++k)
      for (int j = 0; j <= D; ++j) {
        const double step = learning_rate * invN * grad[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        ws.W[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] -= step;
        max_step = std::max(max_step, std::fabs(step));
      }
    if (max_step < param_tolerance) break;
  }
  return ws;
}

inline Vec init_user_weights(const ContextWarmStart* warm, const UserContext& u, int K) {
  if (K < 1) throw std::invalid_argument("init_user_weights: K must be >= 1");
  if (warm == nullptr)
    return Vec(static_cast<std::size_t>(K), 1.0 / static_cast<double>(K));
  if (warm->K != K) throw std::invalid_argument("init_user_weights: warm start K mismatch");
  return warm->predict(u);
}

struct EwcRecommendation {
  int expert = 0;
  int option = 0;
};

// Draw an expert from the user's weights (or take the argmax) and recommend
// that expert's best option with the indicator off.
inline EwcRecommendation ewc_recommend(const Vec& weights, const ExpertSet& experts,
                                       const std::vector<OptionContext>& options,
                                       Rng& rng, bool sample_expert = true) {
  if (experts.empty()) throw std::invalid_argument("ewc_recommend: empty expert set");
  if (weights.size() != experts.size())
    throw std::invalid_argument("ewc_recommend: weights/experts length mismatch");
  int e;
  if (sample_expert) {
    e = rng.categorical(weights);
  } else {
    e = argmax_lowest_tie(weights);
  }
  const Vec u = utilities(experts[static_cast<std::size_t>(e)], options, std::nullopt);
  return {e, argmax_lowest_tie(u)};
}

// 0-1 loss per expert for the realized round; each expert predicts under the
// recommendation that was actually issued.
inline Vec expert_losses(const ExpertSet& experts, const InteractionRound& realized) {
  Vec losses(experts.size(), 0.0);
  for (std::size_t k = 0; k < experts.size(); ++k) {
    const Vec u = utilities(experts[k], realized.options, realized.recommended);
    losses[k] = zero_one_loss(argmax_lowest_tie(u), realized.chosen);
  }
  return losses;
}

inline Vec ewc_observe(const Vec& weights, const ExpertSet& experts,
                       const InteractionRound& realized, double eta) {
  return hedge_update(weights, expert_losses(experts, realized), eta);
}

}  // namespace prefbandit
