#include <gtest/gtest.h>

#include <cmath>

#include "prefbandit/ewc.hpp"

using namespace prefbandit;

TEST(HedgeUpdate, FrozenTwoExpertValue) {
  // (1/2, 1/2) with losses (1, 0) at eta 1:
  // (e^-1, 1) / (e^-1 + 1) = (0.26894..., 0.73105...)
  const Vec w = hedge_update({0.5, 0.5}, {1.0, 0.0}, 1.0);
  EXPECT_NEAR(w[0], 0.2689414213699951, 1e-15);
  EXPECT_NEAR(w[1], 0.7310585786300049, 1e-15);
}

TEST(HedgeUpdate, NormalizesAndKeepsRatios) {
  const Vec w = hedge_update({0.2, 0.3, 0.5}, {0.7, 0.1, 0.4}, 2.0);
  double sum = 0.0;
  for (double v : w) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  // ratio law: w'_i / w'_j = (w_i / w_j) e^{-eta (l_i - l_j)}
  EXPECT_NEAR(w[0] / w[1], (0.2 / 0.3) * std::exp(-2.0 * (0.7 - 0.1)), 1e-12);
}

TEST(HedgeUpdate, ZeroEtaChangesNothing) {
  const Vec w0 = {0.1, 0.6, 0.3};
  const Vec w = hedge_update(w0, {1.0, 0.0, 0.5}, 0.0);
  for (std::size_t k = 0; k < w.size(); ++k) EXPECT_NEAR(w[k], w0[k], 1e-15);
}

TEST(HedgeUpdate, Rejections) {
  EXPECT_THROW(hedge_update({0.5, 0.5}, {1.0}, 1.0), std::invalid_argument);
  EXPECT_THROW(hedge_update({}, {}, 1.0), std::invalid_argument);
  EXPECT_THROW(hedge_update({0.5, 0.5}, {std::nan(""), 0.0}, 1.0), std::invalid_argument);
  EXPECT_THROW(hedge_update({0.0, 0.0}, {1.0, 1.0}, 1.0), std::domain_error);
}

// Expected cumulative loss of the weighted forecaster never exceeds the best
// expert by more than 2 sqrt(T ln K) at the theory step size. 200 random loss
// sequences; the bound must hold on every one.
TEST(HedgeUpdate, RegretBoundProperty) {
  const int K = 6, T = 100;
  const double eta = std::sqrt(8.0 * std::log(static_cast<double>(K)) / T);
  const double bound = 2.0 * std::sqrt(T * std::log(static_cast<double>(K)));
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    Vec w(K, 1.0 / K);
    Vec cum(K, 0.0);
    double algo = 0.0;
    for (int t = 0; t < T; ++t) {
      Vec losses(K);
      for (double& l : losses) l = rng.uniform();
      for (int k = 0; k < K; ++k) algo += w[static_cast<std::size_t>(k)] * losses[static_cast<std::size_t>(k)];
      for (int k = 0; k < K; ++k) cum[static_cast<std::size_t>(k)] += losses[static_cast<std::size_t>(k)];
      w = hedge_update(w, losses, eta);
    }
    double best = cum[0];
    for (double c : cum) best = std::min(best, c);
    EXPECT_LE(algo - best, bound) << "trial " << trial;
  }
}

TEST(WarmStart, LearnsSeparableContexts) {
  std::vector<UserContext> contexts;
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) {
    contexts.push_back({{i % 2 == 0 ? 1.0 : -1.0}});
    labels.push_back(i % 2);
  }
  const ContextWarmStart ws = warm_start_fit(contexts, labels, 2, 9);
  EXPECT_GT(ws.predict({{1.0}})[0], 0.9);
  EXPECT_GT(ws.predict({{-1.0}})[1], 0.9);
}

TEST(WarmStart, UninformativeContextGivesClassFrequencies) {
  // D = 0: the classifier can only learn the marginal.
  std::vector<UserContext> contexts(8);
  const std::vector<int> labels = {0, 0, 0, 0, 0, 0, 1, 1};
  const ContextWarmStart ws = warm_start_fit(contexts, labels, 2, 3);
  const Vec p = ws.predict(UserContext{});
  EXPECT_NEAR(p[0], 0.75, 0.02);
  EXPECT_NEAR(p[1], 0.25, 0.02);
}

TEST(WarmStart, DegenerateSingleClassSaturates) {
  std::vector<UserContext> contexts(5, UserContext{{0.5}});
  const std::vector<int> labels(5, 2);
  const ContextWarmStart ws = warm_start_fit(contexts, labels, 4, 1);
  const Vec p = ws.predict({{0.5}});
  EXPECT_GT(p[2], 1.0 - 1e-6);
}

TEST(WarmStart, Rejections) {
  EXPECT_THROW(warm_start_fit({}, {}, 2, 1), std::invalid_argument);
  EXPECT_THROW(warm_start_fit({{{1.0}}}, {0, 1}, 2, 1), std::invalid_argument);
  EXPECT_THROW(warm_start_fit({{{1.0}}}, {5}, 2, 1), std::invalid_argument);
  EXPECT_THROW(warm_start_fit({{{1.0}}, {{1.0, 2.0}}}, {0, 1}, 2, 1), std::invalid_argument);
}

TEST(InitWeights, UniformWithoutWarmStart) {
  const Vec w = init_user_weights(nullptr, UserContext{}, 4);
  for (double v : w) EXPECT_DOUBLE_EQ(v, 0.25);
  EXPECT_THROW(init_user_weights(nullptr, UserContext{}, 0), std::invalid_argument);
}

TEST(InitWeights, WarmStartPredictionAndKMismatch) {
  std::vector<UserContext> contexts = {{{1.0}}, {{-1.0}}, {{1.0}}, {{-1.0}}};
  const std::vector<int> labels = {0, 1, 0, 1};
  const ContextWarmStart ws = warm_start_fit(contexts, labels, 2, 4);
  const Vec w = init_user_weights(&ws, {{1.0}}, 2);
  EXPECT_GT(w[0], 0.9);
  EXPECT_THROW(init_user_weights(&ws, {{1.0}}, 3), std::invalid_argument);
}

TEST(Recommend, ArgmaxExpertPicksItsBestOptionIndicatorOff) {
  // expert 0 prefers larger features, expert 1 smaller; huge anchoring
  // weights must not matter at recommendation time.
  const ExpertSet experts = {{1.0, 99.0}, {-1.0, 99.0}};
  const std::vector<OptionContext> options = {{{2.0}}, {{3.0}}};
  Rng rng(1);
  const EwcRecommendation a = ewc_recommend({0.9, 0.1}, experts, options, rng, false);
  EXPECT_EQ(a.expert, 0);
  EXPECT_EQ(a.option, 1);
  const EwcRecommendation b = ewc_recommend({0.1, 0.9}, experts, options, rng, false);
  EXPECT_EQ(b.expert, 1);
  EXPECT_EQ(b.option, 0);
}

TEST(Recommend, SamplingFollowsWeights) {
  const ExpertSet experts = {{1.0, 0.0}, {-1.0, 0.0}};
  const std::vector<OptionContext> options = {{{2.0}}, {{3.0}}};
  Rng rng(77);
  int first = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i)
    if (ewc_recommend({0.8, 0.2}, experts, options, rng, true).expert == 0) ++first;
  EXPECT_NEAR(static_cast<double>(first) / n, 0.8, 0.03);
  EXPECT_THROW(ewc_recommend({0.5}, experts, options, rng, true), std::invalid_argument);
  EXPECT_THROW(ewc_recommend({}, {}, options, rng, true), std::invalid_argument);
}

TEST(ExpertLosses, ScoredUnderTheIssuedRecommendation) {
  // Anchored expert follows the recommendation; plain expert follows features.
  const ExpertSet experts = {{0.0, 10.0}, {1.0, 0.0}};
  InteractionRound realized;
  realized.options = {{{5.0}}, {{1.0}}};
  realized.recommended = 1;
  realized.chosen = 1;
  const Vec losses = expert_losses(experts, realized);
  EXPECT_DOUBLE_EQ(losses[0], 0.0);  // anchored expert predicted the recommended slot
  EXPECT_DOUBLE_EQ(losses[1], 1.0);  // feature expert predicted option 0

  realized.chosen = 0;
  const Vec losses2 = expert_losses(experts, realized);
  EXPECT_DOUBLE_EQ(losses2[0], 1.0);
  EXPECT_DOUBLE_EQ(losses2[1], 0.0);
}

TEST(Observe, ComposesLossesWithHedge) {
  const ExpertSet experts = {{0.0, 10.0}, {1.0, 0.0}};
  InteractionRound realized;
  realized.options = {{{5.0}}, {{1.0}}};
  realized.recommended = 1;
  realized.chosen = 1;
  const Vec w = ewc_observe({0.5, 0.5}, experts, realized, 1.0);
  const Vec expect = hedge_update({0.5, 0.5}, expert_losses(experts, realized), 1.0);
  EXPECT_EQ(w, expect);
  EXPECT_GT(w[0], w[1]);
}
