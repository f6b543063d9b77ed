#pragma once

// Core domain types and the four primitive operations everything else is
// built from: linear utilities with a recommendation indicator, a stable
// softmax, KL divergence against a one-hot choice, and 0-1 loss.
//
// Conventions used throughout the library:
//  - option features have dimension d; preference vectors have dimension d+1,
//    the last coordinate weighting the recommendation indicator;
//  - indices are 0-based in memory (file formats are 1-based);
//  - ties in argmax resolve to the lowest index.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace prefbandit {

using Vec = std::vector<double>;

struct OptionContext {
  Vec features;  // length d; the recommendation indicator is appended on demand
};

struct UserContext {
  Vec features;  // length D
};

// Length d+1; back() is the anchoring weight on the recommendation indicator.
using PreferenceVector = Vec;

struct InteractionRound {
  int user_id = 0;
  int round_index = 0;  // position within the user's history, starting at 1
  std::vector<OptionContext> options;
  int recommended = 0;  // 0-based option index
  int chosen = 0;       // 0-based option index
};

struct UserRecord {
  int user_id = 0;
  UserContext context;
  std::vector<InteractionRound> rounds;
};

struct Dataset {
  int d = 0;  // option feature dimension
  int D = 0;  // user context dimension
  std::vector<UserRecord> users;
};

inline void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

// u_a = theta[0:d] . x_a + theta[d] * 1{a == recommended}.
// recommended == nullopt scores all options with the indicator off, which is
// the convention at recommendation time.
inline Vec utilities(const PreferenceVector& theta,
                     const std::vector<OptionContext>& options,
                     std::optional<int> recommended) {
  if (options.empty()) throw std::invalid_argument("utilities: no options");
  const std::size_t d = options.front().features.size();
  if (theta.size() != d + 1) throw std::invalid_argument("utilities: theta/option dimension mismatch");
  if (recommended && (*recommended < 0 || static_cast<std::size_t>(*recommended) >= options.size()))
    throw std::invalid_argument("utilities: recommended index out of range");
  Vec u(options.size(), 0.0);
  for (std::size_t a = 0; a < options.size(); ++a) {
    const Vec& x = options[a].features;
    if (x.size() != d) throw std::invalid_argument("utilities: ragged option features");
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += theta[j] * x[j];
    if (recommended && static_cast<std::size_t>(*recommended) == a) s += theta[d];
    check_finite(s, "utilities");
    u[a] = s;
  }
  return u;
}

// Max-shifted softmax; exact on ties, never overflows for finite input.
inline Vec softmax(const Vec& u) {
  if (u.empty()) throw std::invalid_argument("softmax: empty input");
  double m = u[0];
  for (double v : u) {
    check_finite(v, "softmax");
    if (v > m) m = v;
  }
  Vec p(u.size());
  double z = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    p[i] = std::exp(u[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

// KL(p || onehot(chosen)) reduces to -log p[chosen]; p[chosen] is clamped at
// 1e-12 so degenerate predictions stay finite.
inline double kl_onehot(const Vec& p, int chosen) {
  if (chosen < 0 || static_cast<std::size_t>(chosen) >= p.size())
    throw std::invalid_argument("kl_onehot: chosen index out of range");
  const double q = p[static_cast<std::size_t>(chosen)] < 1e-12 ? 1e-12 : p[static_cast<std::size_t>(chosen)];
  return -std::log(q);
}

inline double zero_one_loss(int predicted, int chosen) {
  return predicted == chosen ? 0.0 : 1.0;
}

inline int argmax_lowest_tie(const Vec& v) {
  if (v.empty()) throw std::invalid_argument("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

inline Vec onehot(int index, int size) {
  if (index < 0 || index >= size) throw std::invalid_argument("onehot: index out of range");
  Vec v(static_cast<std::size_t>(size), 0.0);
  v[static_cast<std::size_t>(index)] = 1.0;
  return v;
}

// Structural invariants of a dataset: consistent dimensions, indices in
// range, rounds numbered from 1.
inline void validate_dataset(const Dataset& ds) {
  if (ds.d <= 0) throw std::invalid_argument("dataset: d must be positive");
  if (ds.D < 0) throw std::invalid_argument("dataset: D must be non-negative");
  for (const UserRecord& u : ds.users) {
    if (static_cast<int>(u.context.features.size()) != ds.D)
      throw std::invalid_argument("dataset: user context dimension mismatch");
    int expect_round = 1;
    for (const InteractionRound& r : u.rounds) {
      if (r.user_id != u.user_id) throw std::invalid_argument("dataset: round user_id mismatch");
      if (r.round_index != expect_round++) throw std::invalid_argument("dataset: rounds not numbered 1..T");
      if (r.options.size() < 2) throw std::invalid_argument("dataset: round needs at least 2 options");
      for (const OptionContext& o : r.options)
        if (static_cast<int>(o.features.size()) != ds.d)
          throw std::invalid_argument("dataset: option dimension mismatch");
      const int A = static_cast<int>(r.options.size());
      if (r.recommended < 0 || r.recommended >= A) throw std::invalid_argument("dataset: recommended out of range");
      if (r.chosen < 0 || r.chosen >= A) throw std::invalid_argument("dataset: chosen out of range");
    }
  }
}

}  // namespace prefbandit
