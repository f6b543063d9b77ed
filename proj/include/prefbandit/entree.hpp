#pragma once

// Restaurant session ingestion.
//
// Two tab-separated text inputs (grammar documented in docs/formats.md):
//
//   restaurants.tsv   id <TAB> quality <TAB> service <TAB> price <TAB> style <TAB> name
//   sessions*.txt     timestamp <TAB> origin <TAB> entry [<TAB> trail ...] <TAB> end
//
// A session becomes one interaction round: the options are the distinct
// restaurants in the session in order of first appearance, the chosen option
// is the end point, and the recommendation is the last suggestion shown (last
// trail entry, falling back to the entry point). Users are origins; rounds
// are ordered by timestamp; users with fewer than 3 rounds are dropped.
//
// Option features (d = 9): quality level, service level, price level, and a
// six-way style one-hot (five named styles, everything else folds into the
// sixth slot). User context is an intercept only (D = 1).

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefbandit/core.hpp"
#include "prefbandit/rng.hpp"

namespace prefbandit {

struct RestaurantRecord {
  int id = 0;
  int quality = 0;  // 0..4
  int service = 0;  // 0..4
  int price = 0;    // 0..3
  int style = 5;    // 0..5; 5 = other
  std::string name;
};

inline const std::vector<std::string>& quality_tokens() {
  static const std::vector<std::string> t = {"fair", "good", "excellent", "extraordinary", "near_perfect"};
  return t;
}
inline const std::vector<std::string>& price_tokens() {
  static const std::vector<std::string> t = {"under15", "15to30", "30to50", "over50"};
  return t;
}
inline const std::vector<std::string>& style_tokens() {
  static const std::vector<std::string> t = {"american", "asian", "french", "italian", "latin"};
  return t;
}

inline Vec encode_option(const RestaurantRecord& r) {
  static const double quality_scale[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  static const double price_scale[] = {0.0, 0.33, 0.67, 1.0};
  if (r.quality < 0 || r.quality > 4 || r.service < 0 || r.service > 4 ||
      r.price < 0 || r.price > 3 || r.style < 0 || r.style > 5)
    throw std::invalid_argument("encode_option: level out of range");
  Vec x;
  x.push_back(quality_scale[r.quality]);
  x.push_back(quality_scale[r.service]);
  x.push_back(price_scale[r.price]);
  for (int s = 0; s < 6; ++s) x.push_back(s == r.style ? 1.0 : 0.0);
  return x;
}

struct IngestLog {
  long long malformed_lines = 0;
  long long rejected_records = 0;      // restaurant rows with unknown tokens
  long long abandoned_sessions = 0;    // end point -1
  long long unknown_restaurant = 0;    // session referenced an id with no record
  long long short_sessions = 0;        // fewer than 2 distinct restaurants
  long long dropped_users = 0;         // fewer than 3 rounds
  long long sessions_kept = 0;
  int users_kept = 0;
  std::vector<std::string> messages;   // one line per rejected input, with location

  void note(const std::string& where, const std::string& reason) {
    if (messages.size() < 1000) messages.push_back(where + ": " + reason);
  }
};

namespace detail {

inline int token_index(const std::vector<std::string>& tokens, const std::string& v) {
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] == v) return static_cast<int>(i);
  return -1;
}

// Restaurant ids may carry a trailing action letter in session trails.
inline bool parse_place_id(const std::string& token, int* id) {
  std::size_t end = token.size();
  while (end > 0 && std::isalpha(static_cast<unsigned char>(token[end - 1]))) --end;
  if (end == 0) return false;
  for (std::size_t i = token[0] == '-' ? 1 : 0; i < end; ++i)
    if (!std::isdigit(static_cast<unsigned char>(token[i]))) return false;
  *id = std::stoi(token.substr(0, end));
  return true;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

inline std::map<int, RestaurantRecord> parse_restaurants(const std::string& path, IngestLog& log) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_restaurants: cannot open " + path);
  std::map<int, RestaurantRecord> out;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> f = detail::split_tabs(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() < 5) {
      ++log.malformed_lines;
      log.note(where, "expected at least 5 tab-separated fields");
      continue;
    }
    RestaurantRecord r;
    try {
      r.id = std::stoi(f[0]);
    } catch (...) {
      ++log.malformed_lines;
      log.note(where, "bad restaurant id '" + f[0] + "'");
      continue;
    }
    r.quality = detail::token_index(quality_tokens(), f[1]);
    r.service = detail::token_index(quality_tokens(), f[2]);
    r.price = detail::token_index(price_tokens(), f[3]);
    if (r.quality < 0 || r.service < 0 || r.price < 0) {
      ++log.rejected_records;
      log.note(where, "unknown category token");
      continue;
    }
    const int style = detail::token_index(style_tokens(), f[4]);
    r.style = style < 0 ? 5 : style;  // anything unnamed folds into "other"
    r.name = f.size() > 5 ? f[5] : "";
    out[r.id] = r;
  }
  return out;
}

struct RawSession {
  std::string timestamp;
  std::string origin;
  std::vector<int> place_sequence;  // entry, trail..., end
  long long arrival = 0;            // for stable ordering on equal timestamps
};

inline std::vector<RawSession> parse_session_file(const std::string& path, IngestLog& log,
                                                  long long* arrival_counter) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_session_file: cannot open " + path);
  std::vector<RawSession> out;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> f = detail::split_tabs(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() < 4) {
      ++log.malformed_lines;
      log.note(where, "expected timestamp, origin, entry, [trail...], end");
      continue;
    }
    RawSession s;
    s.timestamp = f[0];
    s.origin = f[1];
    bool ok = true;
    for (std::size_t i = 2; i < f.size(); ++i) {
      int id = 0;
      if (!detail::parse_place_id(f[i], &id)) {
        ++log.malformed_lines;
        log.note(where, "bad place token '" + f[i] + "'");
        ok = false;
        break;
      }
      s.place_sequence.push_back(id);
    }
    if (!ok) continue;
    if (s.origin.empty()) {
      ++log.malformed_lines;
      log.note(where, "empty origin");
      continue;
    }
    if (s.place_sequence.back() < 0) {
      ++log.abandoned_sessions;
      continue;
    }
    s.arrival = (*arrival_counter)++;
    out.push_back(std::move(s));
  }
  return out;
}

// Sessions from every file, grouped into per-user rounds.
inline Dataset parse_sessions(const std::vector<std::string>& session_paths,
                              const std::map<int, RestaurantRecord>& restaurants,
                              IngestLog& log) {
  long long arrivals = 0;
  std::vector<RawSession> sessions;
  for (const std::string& path : session_paths) {
    std::vector<RawSession> part = parse_session_file(path, log, &arrivals);
    sessions.insert(sessions.end(), part.begin(), part.end());
  }

  struct PendingRound {
    std::string timestamp;
    long long arrival;
    std::vector<int> option_ids;
    int recommended;
    int chosen;
  };
  std::map<std::string, std::vector<PendingRound>> by_origin;

  for (const RawSession& s : sessions) {
    bool known = true;
    for (int id : s.place_sequence)
      if (restaurants.find(id) == restaurants.end()) {
        known = false;
        break;
      }
    if (!known) {
      ++log.unknown_restaurant;
      log.note(s.origin + "@" + s.timestamp, "references a restaurant with no record");
      continue;
    }
    std::vector<int> option_ids;
    for (int id : s.place_sequence)
      if (std::find(option_ids.begin(), option_ids.end(), id) == option_ids.end())
        option_ids.push_back(id);
    if (option_ids.size() < 2) {
      ++log.short_sessions;
      continue;
    }
    // Last suggestion shown: final trail entry; entry point if there is no trail.
    const int rec_id = s.place_sequence.size() > 2 ? s.place_sequence[s.place_sequence.size() - 2]
                                                   : s.place_sequence.front();
    const int chosen_id = s.place_sequence.back();
    PendingRound r;
    r.timestamp = s.timestamp;
    r.arrival = s.arrival;
    r.option_ids = std::move(option_ids);
    r.recommended = static_cast<int>(std::find(r.option_ids.begin(), r.option_ids.end(), rec_id) -
                                     r.option_ids.begin());
    r.chosen = static_cast<int>(std::find(r.option_ids.begin(), r.option_ids.end(), chosen_id) -
                                r.option_ids.begin());
    by_origin[s.origin].push_back(std::move(r));
  }

  Dataset ds;
  ds.d = 9;
  ds.D = 1;
  int next_id = 1;
  for (auto& [origin, rounds] : by_origin) {  // std::map: origins in sorted order
    if (rounds.size() < 3) {
      ++log.dropped_users;
      continue;
    }
    std::sort(rounds.begin(), rounds.end(), [](const PendingRound& a, const PendingRound& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.arrival < b.arrival;
    });
    UserRecord u;
    u.user_id = next_id++;
    u.context.features = {1.0};
    int t = 1;
    for (const PendingRound& pr : rounds) {
      InteractionRound r;
      r.user_id = u.user_id;
      r.round_index = t++;
      for (int id : pr.option_ids) r.options.push_back({encode_option(restaurants.at(id))});
      r.recommended = pr.recommended;
      r.chosen = pr.chosen;
      u.rounds.push_back(std::move(r));
    }
    log.sessions_kept += static_cast<long long>(u.rounds.size());
    ds.users.push_back(std::move(u));
  }
  log.users_kept = static_cast<int>(ds.users.size());
  validate_dataset(ds);
  return ds;
}

// restaurants.tsv plus every sessions*.txt in the directory, filename order.
inline Dataset ingest_directory(const std::string& dir, IngestLog& log) {
  namespace fs = std::filesystem;
  const std::string table = (fs::path(dir) / "restaurants.tsv").string();
  std::map<int, RestaurantRecord> restaurants = parse_restaurants(table, log);
  std::vector<std::string> session_paths;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("sessions", 0) == 0 && name.size() >= 4 &&
        name.compare(name.size() - 4, 4, ".txt") == 0)
      session_paths.push_back(e.path().string());
  }
  std::sort(session_paths.begin(), session_paths.end());
  if (session_paths.empty())
    throw std::runtime_error("ingest_directory: no sessions*.txt in " + dir);
  return parse_sessions(session_paths, restaurants, log);
}

// Disjoint seeded user split; both halves keep user_id order.
inline std::pair<Dataset, Dataset> split_users(const Dataset& ds, int n_train, int n_test,
                                               std::uint64_t seed) {
  if (n_train < 1 || n_test < 1) throw std::invalid_argument("split_users: split sizes must be positive");
  if (static_cast<int>(ds.users.size()) < n_train + n_test)
    throw std::invalid_argument("split_users: need " + std::to_string(n_train + n_test) +
                                " users, have " + std::to_string(ds.users.size()));
  std::vector<int> idx(ds.users.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  Rng rng(derive_seed(seed, "user-split"));
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
    const int j = rng.uniform_int(0, i);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  auto take = [&](int from, int count) {
    Dataset part;
    part.d = ds.d;
    part.D = ds.D;
    std::vector<int> chosen(idx.begin() + from, idx.begin() + from + count);
    std::sort(chosen.begin(), chosen.end());
    for (int i : chosen) part.users.push_back(ds.users[static_cast<std::size_t>(i)]);
    return part;
  };
  return {take(0, n_train), take(n_train, n_test)};
}

// ---------------------------------------------------------------------------
// Synthetic fixture with the same shape as the real logs: a latent-cluster
// preference population browsing generated restaurants. Used when no real
// session files are present.

struct FixtureConfig {
  int n_users = 300;
  int n_restaurants = 120;
  int n_clusters = 8;
  double prototype_scale = 3.0;
  double user_noise = 0.4;
  double anchor_scale = 1.0;
  double mean_extra_rounds = 10.0;   // T = 3 + truncated exponential
  double mean_extra_options = 4.5;   // A = 2 + truncated exponential
  int max_rounds = 105;
  int max_options = 18;
};

struct FixtureSummary {
  int users = 0;
  int restaurants = 0;
  long long sessions = 0;
};

namespace detail {

inline std::string fixture_timestamp(long long minute) {
  const long long mins = minute % 60;
  const long long hours = (minute / 60) % 24;
  const long long day = 1 + (minute / (60 * 24)) % 28;
  const long long month = 1 + (minute / (60 * 24 * 28)) % 12;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "1996-%02lld-%02lldT%02lld:%02lld:00", month, day, hours, mins);
  return buf;
}

}  // namespace detail

inline FixtureSummary write_synthetic_fixture(const std::string& dir, const FixtureConfig& cfg,
                                              std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  FixtureSummary summary;

  static const char* style_pool[] = {"american", "asian", "french", "italian", "latin",
                                     "seafood", "steakhouse", "diner"};

  Rng rng(derive_seed(seed, "fixture"));
  std::ofstream rest_out((fs::path(dir) / "restaurants.tsv").string());
  if (!rest_out) throw std::runtime_error("write_synthetic_fixture: cannot write restaurants.tsv");
  std::vector<RestaurantRecord> records;
  std::map<int, RestaurantRecord> table;
  for (int i = 0; i < cfg.n_restaurants; ++i) {
    RestaurantRecord r;
    r.id = 100 + i;
    r.quality = rng.uniform_int(0, 4);
    r.service = rng.uniform_int(0, 4);
    r.price = rng.uniform_int(0, 3);
    const char* style = style_pool[rng.uniform_int(0, 7)];
    const int style_idx = detail::token_index(style_tokens(), style);
    r.style = style_idx < 0 ? 5 : style_idx;
    r.name = "Resto " + std::to_string(r.id);
    rest_out << r.id << '\t' << quality_tokens()[static_cast<std::size_t>(r.quality)] << '\t'
             << quality_tokens()[static_cast<std::size_t>(r.service)] << '\t'
             << price_tokens()[static_cast<std::size_t>(r.price)] << '\t' << style << '\t'
             << r.name << '\n';
    records.push_back(r);
    table[r.id] = r;
  }
  summary.restaurants = cfg.n_restaurants;

  std::vector<PreferenceVector> prototypes;
  for (int k = 0; k < cfg.n_clusters; ++k) {
    PreferenceVector p(9);
    for (double& v : p) v = rng.normal(0.0, cfg.prototype_scale);
    prototypes.push_back(std::move(p));
  }

  std::ofstream sess_out((fs::path(dir) / "sessions.txt").string());
  if (!sess_out) throw std::runtime_error("write_synthetic_fixture: cannot write sessions.txt");
  static const char trail_actions[] = {'L', 'N', 'B', 'D'};
  long long minute = 0;

  for (int uidx = 0; uidx < cfg.n_users; ++uidx) {
    Rng urng(derive_seed(seed, "fixture-user", static_cast<std::uint64_t>(uidx)));
    const int cluster = urng.uniform_int(0, cfg.n_clusters - 1);
    PreferenceVector theta(10);
    for (int j = 0; j < 9; ++j)
      theta[static_cast<std::size_t>(j)] =
          prototypes[static_cast<std::size_t>(cluster)][static_cast<std::size_t>(j)] +
          urng.normal(0.0, cfg.user_noise);
    theta[9] = cfg.anchor_scale * urng.beta(0.3, 0.3);

    const int extra = static_cast<int>(std::floor(-cfg.mean_extra_rounds * std::log(1.0 - urng.uniform())));
    const int T = 3 + std::min(cfg.max_rounds - 3, extra);
    char origin[64];
    std::snprintf(origin, sizeof(origin), "u%04d.example.net", uidx);

    for (int t = 0; t < T; ++t) {
      const bool no_trail = urng.uniform() < 0.1;
      int A;
      if (no_trail) {
        A = 2;
      } else {
        const int extra_opts =
            static_cast<int>(std::floor(-cfg.mean_extra_options * std::log(1.0 - urng.uniform())));
        A = 2 + std::min(cfg.max_options - 2, extra_opts);
      }
      // A distinct restaurants by partial shuffle over indices.
      std::vector<int> pool(static_cast<std::size_t>(cfg.n_restaurants));
      for (int i = 0; i < cfg.n_restaurants; ++i) pool[static_cast<std::size_t>(i)] = i;
      std::vector<int> opts;
      for (int a = 0; a < A; ++a) {
        const int j = urng.uniform_int(a, cfg.n_restaurants - 1);
        std::swap(pool[static_cast<std::size_t>(a)], pool[static_cast<std::size_t>(j)]);
        opts.push_back(records[static_cast<std::size_t>(pool[static_cast<std::size_t>(a)])].id);
      }
      const int rec_idx = no_trail ? 0 : urng.uniform_int(0, A - 1);

      InteractionRound round;
      round.user_id = uidx;
      round.round_index = t + 1;
      for (int id : opts) round.options.push_back({encode_option(table.at(id))});
      round.recommended = rec_idx;
      const Vec probs = softmax(utilities(theta, round.options, round.recommended));
      const int chosen_idx = Rng::pick(probs, 1.0, urng.uniform());

      sess_out << detail::fixture_timestamp(minute) << '\t' << origin << '\t' << opts[0];
      // The short form (no trail) only encodes both options when the end
      // point differs from the entry; otherwise fall back to a full trail.
      if (!no_trail || chosen_idx == 0) {
        // every non-entry option, recommendation last
        for (int a = 1; a < A; ++a) {
          if (a == rec_idx) continue;
          sess_out << '\t' << opts[static_cast<std::size_t>(a)]
                   << trail_actions[urng.uniform_int(0, 3)];
        }
        sess_out << '\t' << opts[static_cast<std::size_t>(rec_idx)]
                 << trail_actions[urng.uniform_int(0, 3)];
      }
      sess_out << '\t' << opts[static_cast<std::size_t>(chosen_idx)] << '\n';
      ++summary.sessions;
      minute += 7;
    }
    ++summary.users;
    minute += 60;
  }
  return summary;
}

}  // namespace prefbandit
