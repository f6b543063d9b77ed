#pragma once

// Flat key=value run configuration. Lines are `key = value`; `#` starts a
// comment; unknown keys are an error so typos cannot silently fall back to
// defaults. docs/formats.md lists every key.

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefbandit/harness.hpp"

namespace prefbandit {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      const std::string t = trim(cur);
      if (!t.empty()) parts.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string t = trim(cur);
  if (!t.empty()) parts.push_back(t);
  return parts;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing junk");
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing junk");
    return i;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

}  // namespace detail

inline std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " has no '='");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " has empty key");
    if (kv.count(key))
      throw std::invalid_argument("config: duplicate key " + key);
    kv[key] = value;
  }
  return kv;
}

// Keys for bound/probe subcommands live beside the experiment keys so one
// file can drive a whole study.
struct BoundParams {
  double N = 298, K = 6, A = 2, d = 2, l = 0.1, C = 10, delta = 0.05;
  std::vector<double> T_grid = {2, 5, 10, 20, 40, 80, 160, 320, 640, 1280};
  bool has_gmm = false;
  double gmm_L = 0, gmm_eps = 0, gmm_sigma2 = 0, gmm_N = 1;
  std::vector<double> gmm_pis, gmm_traces;
};

struct ProbeParams {
  int d = 5;
  std::vector<int> T_grid = {20, 200, 2000};
  int trials = 20;
  double signal_gain = 50.0;
};

struct RunSpec {
  ExperimentConfig experiment;
  BoundParams bounds;
  ProbeParams probe;
  std::string data_path;       // pre-ingested dataset JSON
  std::string fit_path;        // fit output consumed by `cluster`
  std::string cluster_mode = "loss_guided";
  std::vector<int> select_k_candidates;
  bool synth_fixture = false;  // restaurant: generate the bundled-format fixture
};

inline RunSpec spec_from_kv(const std::map<std::string, std::string>& kv) {
  using detail::to_bool;
  using detail::to_double;
  using detail::to_int;
  RunSpec spec;
  ExperimentConfig& e = spec.experiment;
  std::set<std::string> seen;

  for (const auto& [key, value] : kv) {
    seen.insert(key);
    if (key == "scenario") e.scenario = value;
    else if (key == "algorithms") e.algorithms = detail::split_list(value);
    else if (key == "seeds") {
      e.seeds.clear();
      for (const std::string& s : detail::split_list(value))
        e.seeds.push_back(static_cast<std::uint64_t>(to_int(key, s)));
    } else if (key == "K") e.K = static_cast<int>(to_int(key, value));
    else if (key == "eta") e.eta = to_double(key, value);
    else if (key == "alpha") e.alpha = to_double(key, value);
    else if (key == "ridge") e.ridge = to_double(key, value);
    else if (key == "learning_rate") e.fit.learning_rate = to_double(key, value);
    else if (key == "l2_penalty") e.fit.l2_penalty = to_double(key, value);
    else if (key == "max_epochs") e.fit.max_epochs = static_cast<int>(to_int(key, value));
    else if (key == "param_tolerance") e.fit.param_tolerance = to_double(key, value);
    else if (key == "feature_scale") e.fit.feature_scale = to_double(key, value);
    else if (key == "init_std") e.fit.init_std = to_double(key, value);
    else if (key == "sample_expert") e.sample_expert = to_bool(key, value);
    else if (key == "beta") e.beta = to_double(key, value);
    else if (key == "sessions_dir") e.sessions_dir = value;
    else if (key == "n_train_users") e.n_train_users = static_cast<int>(to_int(key, value));
    else if (key == "n_test_users") e.n_test_users = static_cast<int>(to_int(key, value));
    else if (key == "out") e.out_dir = value;
    else if (key == "respondents") e.gen.respondents = static_cast<int>(to_int(key, value));
    else if (key == "samples_per_respondent") e.gen.samples_per_respondent = static_cast<int>(to_int(key, value));
    else if (key == "lambda") e.gen.lambda = to_double(key, value);
    else if (key == "T") e.gen.T = static_cast<int>(to_int(key, value));
    else if (key == "n_train") e.gen.n_train = static_cast<int>(to_int(key, value));
    else if (key == "n_test") e.gen.n_test = static_cast<int>(to_int(key, value));
    else if (key == "argmax_choice") e.gen.argmax_choice = to_bool(key, value);
    else if (key == "max_rejections") e.gen.max_rejections = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "data") spec.data_path = value;
    else if (key == "fit") spec.fit_path = value;
    else if (key == "cluster_mode") spec.cluster_mode = value;
    else if (key == "select_k_candidates") {
      for (const std::string& s : detail::split_list(value))
        spec.select_k_candidates.push_back(static_cast<int>(to_int(key, s)));
    } else if (key == "synth_fixture") spec.synth_fixture = to_bool(key, value);
    else if (key == "bound_N") spec.bounds.N = to_double(key, value);
    else if (key == "bound_K") spec.bounds.K = to_double(key, value);
    else if (key == "bound_A") spec.bounds.A = to_double(key, value);
    else if (key == "bound_d") spec.bounds.d = to_double(key, value);
    else if (key == "bound_l") spec.bounds.l = to_double(key, value);
    else if (key == "bound_C") spec.bounds.C = to_double(key, value);
    else if (key == "bound_delta") spec.bounds.delta = to_double(key, value);
    else if (key == "bound_T_grid") {
      spec.bounds.T_grid.clear();
      for (const std::string& s : detail::split_list(value))
        spec.bounds.T_grid.push_back(to_double(key, s));
    } else if (key == "gmm_L") { spec.bounds.gmm_L = to_double(key, value); spec.bounds.has_gmm = true; }
    else if (key == "gmm_eps") { spec.bounds.gmm_eps = to_double(key, value); spec.bounds.has_gmm = true; }
    else if (key == "gmm_sigma2") { spec.bounds.gmm_sigma2 = to_double(key, value); spec.bounds.has_gmm = true; }
    else if (key == "gmm_N") { spec.bounds.gmm_N = to_double(key, value); spec.bounds.has_gmm = true; }
    else if (key == "gmm_pis") {
      spec.bounds.gmm_pis.clear();
      for (const std::string& s : detail::split_list(value))
        spec.bounds.gmm_pis.push_back(to_double(key, s));
      spec.bounds.has_gmm = true;
    } else if (key == "gmm_traces") {
      spec.bounds.gmm_traces.clear();
      for (const std::string& s : detail::split_list(value))
        spec.bounds.gmm_traces.push_back(to_double(key, s));
      spec.bounds.has_gmm = true;
    } else if (key == "probe_d") spec.probe.d = static_cast<int>(to_int(key, value));
    else if (key == "probe_trials") spec.probe.trials = static_cast<int>(to_int(key, value));
    else if (key == "probe_signal_gain") spec.probe.signal_gain = to_double(key, value);
    else if (key == "probe_T_grid") {
      spec.probe.T_grid.clear();
      for (const std::string& s : detail::split_list(value))
        spec.probe.T_grid.push_back(static_cast<int>(to_int(key, s)));
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }

  return spec;
}

inline RunSpec load_run_spec(const std::string& path) {
  return spec_from_kv(parse_kv_file(path));
}

}  // namespace prefbandit
