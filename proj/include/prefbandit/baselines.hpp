#pragma once

// Online learners sharing one stepping interface: act() proposes an option
// for a user's round, learn() consumes the realized round (with the
// recommendation as issued and the user's actual choice). All per-user state
// lives inside the learner, keyed by user_id.
//
// Implemented here:
//   - EWC (Hedge over clustered experts, optional context warm start)
//   - FTL over the same expert set
//   - hybrid LinUCB with a shared interaction model and per-slot arm models
//   - DynUCB (per-user ridge, online L2 re-clustering, cluster-level UCB)
//   - the online-only preference fitter (no clustering, no experts)
//   - oracle variants fed generator truth

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefbandit/clustering.hpp"
#include "prefbandit/core.hpp"
#include "prefbandit/ewc.hpp"
#include "prefbandit/linalg.hpp"
#include "prefbandit/noncompliance.hpp"
#include "prefbandit/rng.hpp"

namespace prefbandit {

struct LearnerAssets {
  int d = 0;
  int D = 0;
  std::map<int, UserContext> contexts;       // test-user contexts
  ExpertSet experts;                         // clustered centroids
  const ContextWarmStart* warm = nullptr;    // optional
  ExpertSet experts_plain;                   // fitted without the recommendation indicator
  const ContextWarmStart* warm_plain = nullptr;
  std::map<int, PreferenceVector> true_thetas;  // generator truth (oracle_theta)
  std::map<int, int> true_labels;               // generator-truth cluster labels (oracle_cluster)
  double eta = 1.0;
  double alpha = 0.05;
  double ridge = 1.0;
  int dynucb_clusters = 6;
  FitConfig online_fit;  // for the online-only fitter
  bool sample_expert = true;
};

class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::string name() const = 0;
  virtual int act(int user_id, const std::vector<OptionContext>& options) = 0;
  virtual void learn(const InteractionRound& realized) = 0;
};

// ---------------------------------------------------------------------------

class EwcLearner : public Learner {
 public:
  EwcLearner(const LearnerAssets& assets, std::uint64_t seed, bool use_warm,
             bool plain_experts, std::string name)
      : assets_(assets),
        experts_(plain_experts ? assets.experts_plain : assets.experts),
        warm_(use_warm ? (plain_experts ? assets.warm_plain : assets.warm) : nullptr),
        rng_(derive_seed(seed, "ewc-expert-draw")),
        name_(std::move(name)) {
    if (experts_.empty()) throw std::invalid_argument(name_ + ": expert set missing");
  }

  std::string name() const override { return name_; }

  int act(int user_id, const std::vector<OptionContext>& options) override {
    return ewc_recommend(weights(user_id), experts_, options, rng_, assets_.sample_expert).option;
  }

  void learn(const InteractionRound& realized) override {
    Vec& w = weights(realized.user_id);
    w = ewc_observe(w, experts_, realized, assets_.eta);
  }

  // Lazily initialized on first contact: warm-start prediction from the
  // user's context when available, uniform otherwise.
  Vec& weights(int user_id) {
    auto it = weights_.find(user_id);
    if (it == weights_.end()) {
      auto ctx = assets_.contexts.find(user_id);
      if (warm_ != nullptr && ctx == assets_.contexts.end())
        throw std::invalid_argument(name_ + ": unknown user " + std::to_string(user_id));
      Vec w = warm_ != nullptr ? init_user_weights(warm_, ctx->second, static_cast<int>(experts_.size()))
                               : init_user_weights(nullptr, UserContext{}, static_cast<int>(experts_.size()));
      it = weights_.emplace(user_id, std::move(w)).first;
    }
    return it->second;
  }

 private:
  const LearnerAssets& assets_;
  ExpertSet experts_;
  const ContextWarmStart* warm_;
  Rng rng_;
  std::string name_;
  std::map<int, Vec> weights_;
};

// Follow-the-leader over the same experts and the same loss accounting.
class FtlLearner : public Learner {
 public:
  FtlLearner(const LearnerAssets& assets, std::string name = "ftl")
      : assets_(assets), name_(std::move(name)) {
    if (assets_.experts.empty()) throw std::invalid_argument("ftl: expert set missing");
  }

  std::string name() const override { return name_; }

  int act(int user_id, const std::vector<OptionContext>& options) override {
    const Vec& cum = cumulative(user_id);
    // leader = argmin cumulative loss, lowest index on ties
    std::size_t leader = 0;
    for (std::size_t k = 1; k < cum.size(); ++k)
      if (cum[k] < cum[leader]) leader = k;
    const Vec u = utilities(assets_.experts[leader], options, std::nullopt);
    return argmax_lowest_tie(u);
  }

  void learn(const InteractionRound& realized) override {
    Vec losses = expert_losses(assets_.experts, realized);
    Vec& cum = cumulative(realized.user_id);
    for (std::size_t k = 0; k < cum.size(); ++k) cum[k] += losses[k];
  }

 private:
  Vec& cumulative(int user_id) {
    auto it = cum_.find(user_id);
    if (it == cum_.end()) it = cum_.emplace(user_id, Vec(assets_.experts.size(), 0.0)).first;
    return it->second;
  }

  const LearnerAssets& assets_;
  std::string name_;
  std::map<int, Vec> cum_;
};

// ---------------------------------------------------------------------------
// Hybrid LinUCB. Shared part z = vec(user_context (x) option_features); arm
// part x = option features, one ridge model per option slot, created lazily.
// Reward is 1{recommended == chosen}; only the recommended slot's model is
// ever updated, which the update counters make auditable.

class LinUcbHybrid : public Learner {
 public:
  LinUcbHybrid(const LearnerAssets& assets, std::string name = "linucb")
      : assets_(assets), k_(assets.D * assets.d), name_(std::move(name)) {
    if (assets_.d <= 0 || assets_.D <= 0)
      throw std::invalid_argument("linucb: feature dimensions missing");
    A0_ = Mat::identity(k_, assets_.ridge);
    b0_.assign(static_cast<std::size_t>(k_), 0.0);
  }

  std::string name() const override { return name_; }

  int act(int user_id, const std::vector<OptionContext>& options) override {
    const CholFactor f0 = cholesky(A0_);
    const Vec beta_hat = f0.solve(b0_);
    int best = 0;
    double best_score = 0.0;
    for (std::size_t a = 0; a < options.size(); ++a) {
      const Vec& x = options[a].features;
      const Vec z = shared_features(user_id, x);
      const Arm& arm = arm_model(static_cast<int>(a));
      const CholFactor fa = cholesky(arm.A);
      // theta_a = A_a^-1 (b_a - B_a beta)
      Vec rhs(x.size());
      const Vec Bb = matvec(arm.B, beta_hat);
      for (std::size_t j = 0; j < rhs.size(); ++j) rhs[j] = arm.b[j] - Bb[j];
      const Vec theta_a = fa.solve(rhs);

      const Vec A0inv_z = f0.solve(z);
      const Vec Ainv_x = fa.solve(x);
      const Vec Bt_Ainv_x = matvec_t(arm.B, Ainv_x);
      const Vec A0inv_Bt_Ainv_x = f0.solve(Bt_Ainv_x);
      double s = dot(z, A0inv_z) - 2.0 * dot(A0inv_z, Bt_Ainv_x) + dot(x, Ainv_x) +
                 dot(Bt_Ainv_x, A0inv_Bt_Ainv_x);
      if (s < 0.0) s = 0.0;  // round-off guard; s is a variance
      const double score = dot(z, beta_hat) + dot(x, theta_a) + assets_.alpha * std::sqrt(s);
      if (a == 0 || score > best_score) {
        best = static_cast<int>(a);
        best_score = score;
      }
    }
    return best;
  }

  void learn(const InteractionRound& realized) override {
    const int a = realized.recommended;
    if (a < 0 || static_cast<std::size_t>(a) >= realized.options.size())
      throw std::invalid_argument("linucb: realized recommendation out of range");
    const double reward = realized.recommended == realized.chosen ? 1.0 : 0.0;
    const Vec& x = realized.options[static_cast<std::size_t>(a)].features;
    const Vec z = shared_features(realized.user_id, x);
    Arm& arm = arm_model(a);

    // Retire the arm's old contribution to the shared model, update the arm,
    // then fold the refreshed contribution back in.
    {
      const CholFactor fa = cholesky(arm.A);
      fold_arm(arm, fa, -1.0);
    }
    add_outer(arm.A, x, x);
    add_outer(arm.B, x, z);
    for (std::size_t j = 0; j < x.size(); ++j) arm.b[j] += reward * x[j];
    {
      const CholFactor fa = cholesky(arm.A);
      fold_arm(arm, fa, +1.0);
    }
    add_outer(A0_, z, z);
    for (std::size_t j = 0; j < z.size(); ++j) b0_[j] += reward * z[j];
    ++arm.updates;
    ++updates_;
  }

  long long updates() const { return updates_; }
  long long arm_updates(int slot) const {
    auto it = arms_.find(slot);
    return it == arms_.end() ? 0 : it->second.updates;
  }

 private:
  struct Arm {
    Mat A;  // d x d
    Mat B;  // d x k
    Vec b;  // d
    long long updates = 0;
  };

  Arm& arm_model(int slot) {
    auto it = arms_.find(slot);
    if (it == arms_.end()) {
      Arm arm;
      arm.A = Mat::identity(assets_.d, assets_.ridge);
      arm.B = Mat(assets_.d, k_);
      arm.b.assign(static_cast<std::size_t>(assets_.d), 0.0);
      it = arms_.emplace(slot, std::move(arm)).first;
    }
    return it->second;
  }

  // A0 += s * B^T A^-1 B ; b0 += s * B^T A^-1 b
  void fold_arm(const Arm& arm, const CholFactor& fa, double s) {
    for (int c = 0; c < k_; ++c) {
      Vec col(static_cast<std::size_t>(assets_.d));
      for (int r = 0; r < assets_.d; ++r) col[static_cast<std::size_t>(r)] = arm.B(r, c);
      const Vec Ainv_col = fa.solve(col);
      for (int c2 = 0; c2 < k_; ++c2) {
        double v = 0.0;
        for (int r = 0; r < assets_.d; ++r) v += arm.B(r, c2) * Ainv_col[static_cast<std::size_t>(r)];
        A0_(c2, c) += s * v;
      }
    }
    const Vec Ainv_b = fa.solve(arm.b);
    const Vec Bt = matvec_t(arm.B, Ainv_b);
    for (int c = 0; c < k_; ++c) b0_[static_cast<std::size_t>(c)] += s * Bt[static_cast<std::size_t>(c)];
  }

  Vec shared_features(int user_id, const Vec& x) const {
    auto it = assets_.contexts.find(user_id);
    if (it == assets_.contexts.end())
      throw std::invalid_argument("linucb: unknown user " + std::to_string(user_id));
    const Vec& u = it->second.features;
    Vec z(static_cast<std::size_t>(k_), 0.0);
    std::size_t idx = 0;
    for (double uv : u)
      for (double xv : x) z[idx++] = uv * xv;
    return z;
  }

  const LearnerAssets& assets_;
  int k_;
  std::string name_;
  Mat A0_;
  Vec b0_;
  std::map<int, Arm> arms_;
  long long updates_ = 0;
};

// ---------------------------------------------------------------------------
// DynUCB. Per-user ridge over [x ; vec(u (x) x)]; users sit in one of K
// clusters whose aggregate model drives a UCB recommendation. After every
// feedback the user's estimate updates and the user moves to the cluster with
// the nearest aggregate estimate (L2). Periodic (less frequent) reassignment
// is the documented alternative cadence; this implementation reassigns every
// round.

class DynUcb : public Learner {
 public:
  DynUcb(const LearnerAssets& assets, std::uint64_t seed, bool reassign = true,
         std::string name = "dynucb")
      : assets_(assets),
        dim_(assets.d + assets.D * assets.d),
        K_(assets.dynucb_clusters),
        reassign_(reassign),
        rng_(derive_seed(seed, "dynucb-init")),
        name_(std::move(name)) {
    if (K_ < 1) throw std::invalid_argument("dynucb: cluster count must be >= 1");
    clusters_.resize(static_cast<std::size_t>(K_));
    for (int k = 0; k < K_; ++k) {
      clusters_[static_cast<std::size_t>(k)].M = Mat::identity(dim_, assets_.ridge);
      clusters_[static_cast<std::size_t>(k)].b.assign(static_cast<std::size_t>(dim_), 0.0);
      clusters_[static_cast<std::size_t>(k)].dirty = true;
    }
  }

  std::string name() const override { return name_; }

  int act(int user_id, const std::vector<OptionContext>& options) override {
    UserState& u = user(user_id);
    Cluster& c = clusters_[static_cast<std::size_t>(u.cluster)];
    refresh(c);
    const double width_scale = std::sqrt(std::log(static_cast<double>(rounds_seen_ + 2)));
    int best = 0;
    double best_score = 0.0;
    for (std::size_t a = 0; a < options.size(); ++a) {
      const Vec phi = features(user_id, options[a].features);
      const double mean = dot(c.theta_bar, phi);
      const double width = assets_.alpha * std::sqrt(c.factor.quad_inv(phi)) * width_scale;
      const double score = mean + width;
      if (a == 0 || score > best_score) {
        best = static_cast<int>(a);
        best_score = score;
      }
    }
    return best;
  }

  void learn(const InteractionRound& realized) override {
    UserState& u = user(realized.user_id);
    const double reward = realized.recommended == realized.chosen ? 1.0 : 0.0;
    const Vec phi = features(realized.user_id,
                             realized.options[static_cast<std::size_t>(realized.recommended)].features);

    Cluster& own = clusters_[static_cast<std::size_t>(u.cluster)];
    add_outer(own.M, phi, phi);
    for (std::size_t j = 0; j < phi.size(); ++j) own.b[j] += reward * phi[j];
    own.dirty = true;

    add_outer(u.M, phi, phi);
    for (std::size_t j = 0; j < phi.size(); ++j) u.b[j] += reward * phi[j];
    u.theta_hat = cholesky(u.M).solve(u.b);
    ++rounds_seen_;

    if (!reassign_) return;
    int nearest = u.cluster;
    double nearest_dist = 0.0;
    for (int k = 0; k < K_; ++k) {
      Cluster& c = clusters_[static_cast<std::size_t>(k)];
      refresh(c);
      const double dist = l2_distance_sq(u.theta_hat, c.theta_bar);
      if (k == 0 || dist < nearest_dist) {
        nearest = k;
        nearest_dist = dist;
      }
    }
    if (nearest != u.cluster) move_user(u, nearest);
  }

  int cluster_of(int user_id) { return user(user_id).cluster; }

 private:
  struct UserState {
    int cluster = 0;
    Mat M;
    Vec b;
    Vec theta_hat;
  };

  struct Cluster {
    Mat M;  // I + sum over members of (M_i - I)
    Vec b;
    Vec theta_bar;
    CholFactor factor;
    bool dirty = true;
  };

  UserState& user(int user_id) {
    auto it = users_.find(user_id);
    if (it == users_.end()) {
      UserState s;
      s.cluster = rng_.uniform_int(0, K_ - 1);
      s.M = Mat::identity(dim_, assets_.ridge);
      s.b.assign(static_cast<std::size_t>(dim_), 0.0);
      s.theta_hat.assign(static_cast<std::size_t>(dim_), 0.0);
      it = users_.emplace(user_id, std::move(s)).first;
      // joining contributes nothing yet (M_i = prior, b_i = 0)
    }
    return it->second;
  }

  void move_user(UserState& u, int to) {
    Cluster& from_c = clusters_[static_cast<std::size_t>(u.cluster)];
    Cluster& to_c = clusters_[static_cast<std::size_t>(to)];
    Mat delta = u.M;
    add_mat(delta, Mat::identity(dim_, assets_.ridge), -1.0);
    add_mat(from_c.M, delta, -1.0);
    add_mat(to_c.M, delta, +1.0);
    for (int j = 0; j < dim_; ++j) {
      from_c.b[static_cast<std::size_t>(j)] -= u.b[static_cast<std::size_t>(j)];
      to_c.b[static_cast<std::size_t>(j)] += u.b[static_cast<std::size_t>(j)];
    }
    from_c.dirty = to_c.dirty = true;
    u.cluster = to;
  }

  void refresh(Cluster& c) {
    if (!c.dirty) return;
    c.factor = cholesky(c.M);
    c.theta_bar = c.factor.solve(c.b);
    c.dirty = false;
  }

  Vec features(int user_id, const Vec& x) const {
    auto it = assets_.contexts.find(user_id);
    if (it == assets_.contexts.end())
      throw std::invalid_argument("dynucb: unknown user " + std::to_string(user_id));
    const Vec& u = it->second.features;
    Vec phi;
    phi.reserve(x.size() + u.size() * x.size());
    phi.insert(phi.end(), x.begin(), x.end());
    for (double uv : u)
      for (double xv : x) phi.push_back(uv * xv);
    return phi;
  }

  const LearnerAssets& assets_;
  int dim_;
  int K_;
  bool reassign_;
  Rng rng_;
  std::string name_;
  std::vector<Cluster> clusters_;
  std::map<int, UserState> users_;
  long long rounds_seen_ = 0;
};

// ---------------------------------------------------------------------------
// Online-only preference fitter: no experts, no clustering. After every
// round the user's vector is refit from scratch on the full observed history
// (the offline fitting procedure applied online), so each user starts cold
// and learns only from their own stream.

class OnlineFitLearner : public Learner {
 public:
  OnlineFitLearner(const LearnerAssets& assets, std::uint64_t seed,
                   std::string name = "noncompliance_only")
      : assets_(assets), seed_(seed), name_(std::move(name)) {
    if (assets_.d <= 0) throw std::invalid_argument("online fitter: d missing");
  }

  std::string name() const override { return name_; }

  int act(int user_id, const std::vector<OptionContext>& options) override {
    const PreferenceVector& theta = state(user_id).theta;
    return argmax_lowest_tie(utilities(theta, options, std::nullopt));
  }

  void learn(const InteractionRound& realized) override {
    UserFit& s = state(realized.user_id);
    s.history.push_back(realized);
    const FitOutcome fo = fit_user(s.history, assets_.online_fit, s.seed);
    if (fo.ok) s.theta = fo.theta;  // numerical failure keeps the last estimate
  }

 private:
  struct UserFit {
    PreferenceVector theta;
    std::uint64_t seed = 0;
    std::vector<InteractionRound> history;
  };

  UserFit& state(int user_id) {
    auto it = states_.find(user_id);
    if (it == states_.end()) {
      UserFit s;
      s.seed = seed_ ^ static_cast<std::uint64_t>(user_id);
      Rng rng(s.seed);
      s.theta.assign(static_cast<std::size_t>(assets_.d) + 1, 0.0);
      for (double& v : s.theta) v = rng.normal(0.0, assets_.online_fit.init_std);
      it = states_.emplace(user_id, std::move(s)).first;
    }
    return it->second;
  }

  const LearnerAssets& assets_;
  std::uint64_t seed_;
  std::string name_;
  std::map<int, UserFit> states_;
};

// ---------------------------------------------------------------------------

class OracleThetaLearner : public Learner {
 public:
  explicit OracleThetaLearner(const LearnerAssets& assets) : assets_(assets) {
    if (assets_.true_thetas.empty())
      throw std::invalid_argument("oracle_theta: generator truth not available");
  }
  std::string name() const override { return "oracle_theta"; }
  int act(int user_id, const std::vector<OptionContext>& options) override {
    auto it = assets_.true_thetas.find(user_id);
    if (it == assets_.true_thetas.end())
      throw std::invalid_argument("oracle_theta: no truth for user " + std::to_string(user_id));
    return argmax_lowest_tie(utilities(it->second, options, std::nullopt));
  }
  void learn(const InteractionRound&) override {}

 private:
  const LearnerAssets& assets_;
};

class OracleClusterLearner : public Learner {
 public:
  explicit OracleClusterLearner(const LearnerAssets& assets) : assets_(assets) {
    if (assets_.experts.empty() || assets_.true_labels.empty())
      throw std::invalid_argument("oracle_cluster: experts or truth labels not available");
  }
  std::string name() const override { return "oracle_cluster"; }
  int act(int user_id, const std::vector<OptionContext>& options) override {
    auto it = assets_.true_labels.find(user_id);
    if (it == assets_.true_labels.end())
      throw std::invalid_argument("oracle_cluster: no label for user " + std::to_string(user_id));
    const PreferenceVector& c = assets_.experts.at(static_cast<std::size_t>(it->second));
    return argmax_lowest_tie(utilities(c, options, std::nullopt));
  }
  void learn(const InteractionRound&) override {}

 private:
  const LearnerAssets& assets_;
};

// ---------------------------------------------------------------------------

// Factory for every learner and ablation. Unknown names and missing assets
// are rejected up front.
inline std::unique_ptr<Learner> make_learner(const std::string& algorithm,
                                             const LearnerAssets& assets, std::uint64_t seed) {
  if (algorithm == "ewc") return std::make_unique<EwcLearner>(assets, seed, true, false, "ewc");
  if (algorithm == "ftl") return std::make_unique<FtlLearner>(assets);
  if (algorithm == "linucb") return std::make_unique<LinUcbHybrid>(assets);
  if (algorithm == "dynucb") return std::make_unique<DynUcb>(assets, seed);
  if (algorithm == "noncompliance_only") return std::make_unique<OnlineFitLearner>(assets, seed);
  if (algorithm == "without_noncompliance") {
    if (assets.experts_plain.empty())
      throw std::invalid_argument("without_noncompliance: plain-fit experts not available");
    return std::make_unique<EwcLearner>(assets, seed, true, true, "without_noncompliance");
  }
  if (algorithm == "without_ui")
    return std::make_unique<EwcLearner>(assets, seed, false, false, "without_ui");
  if (algorithm == "oracle_theta") return std::make_unique<OracleThetaLearner>(assets);
  if (algorithm == "oracle_cluster") return std::make_unique<OracleClusterLearner>(assets);
  throw std::invalid_argument("unknown algorithm: " + algorithm);
}

}  // namespace prefbandit
