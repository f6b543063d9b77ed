// Command-line front end. Subcommands:
//
//   generate                 write a synthetic travel population (train/test/provenance JSON)
//   ingest                   parse restaurant session logs into the canonical dataset JSON
//   fit                      offline per-user preference fitting over a dataset
//   cluster                  cluster fitted vectors into experts (optionally sweep K)
//   run                      full offline + online experiment, emits curves/summary/SVG
//   bounds                   regret-bound calculators and the bound crossover table
//   probe-sample-complexity  planted-direction recovery error versus horizon
//
// All state comes from a key=value config file plus a handful of overriding
// flags; outputs are deterministic functions of (config, seed). Failures
// print one machine-readable JSON object to stderr and exit nonzero.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "prefbandit/config.hpp"
#include "prefbandit/harness.hpp"

namespace {

using prefbandit::RunSpec;
using Json = nlohmann::ordered_json;

struct CliError : std::runtime_error {
  int exit_code;
  std::string kind;
  CliError(int code, std::string k, const std::string& msg)
      : std::runtime_error(msg), exit_code(code), kind(std::move(k)) {}
};

void write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw CliError(1, "io_error", "cannot create " + p.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError(1, "io_error", "cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw CliError(1, "io_error", "short write to " + path);
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(1) + "\n"); }

std::string out_path(const RunSpec& spec, const std::string& name) {
  return (std::filesystem::path(spec.experiment.out_dir) / name).string();
}

prefbandit::Dataset load_data(const RunSpec& spec) {
  if (spec.data_path.empty())
    throw CliError(2, "config_error", "this subcommand needs a dataset: set data=PATH or pass --data");
  return prefbandit::load_dataset(spec.data_path);
}

int cmd_generate(const RunSpec& spec, std::uint64_t seed) {
  prefbandit::GenConfig gen = spec.experiment.gen;
  gen.beta = spec.experiment.beta;
  const prefbandit::TravelPopulation pop = prefbandit::build_population(gen, seed);
  write_json(out_path(spec, "train.json"), prefbandit::dataset_to_json(pop.train));
  write_json(out_path(spec, "test.json"), prefbandit::dataset_to_json(pop.test));
  Json truth = Json::object();
  for (const auto& [uid, theta] : pop.true_thetas) truth[std::to_string(uid)] = theta;
  Json extras;
  extras["true_thetas"] = truth;
  Json cu = Json::object();
  for (const auto& [uid, us] : pop.choice_u) cu[std::to_string(uid)] = us;
  extras["choice_uniforms"] = cu;
  write_json(out_path(spec, "truth.json"), extras);
  write_json(out_path(spec, "provenance.json"), pop.provenance);
  std::cout << "generate: wrote train.json test.json truth.json provenance.json to "
            << spec.experiment.out_dir << "\n";
  std::cout << "  train users " << pop.train.users.size() << ", test users "
            << pop.test.users.size() << ", T " << gen.T << ", beta " << gen.beta << "\n";
  return 0;
}

int cmd_ingest(const RunSpec& spec, std::uint64_t seed) {
  std::string dir = spec.experiment.sessions_dir;
  if (spec.synth_fixture) {
    if (dir.empty()) dir = out_path(spec, "fixture");
    if (!std::filesystem::exists(std::filesystem::path(dir) / "restaurants.tsv"))
      prefbandit::write_synthetic_fixture(dir, prefbandit::FixtureConfig{}, seed);
  }
  if (dir.empty())
    throw CliError(2, "config_error", "ingest needs sessions_dir=PATH (or synth_fixture=true)");
  prefbandit::IngestLog log;
  const prefbandit::Dataset ds = prefbandit::ingest_directory(dir, log);
  write_json(out_path(spec, "dataset.json"), prefbandit::dataset_to_json(ds));
  Json lg;
  lg["malformed_lines"] = log.malformed_lines;
  lg["rejected_records"] = log.rejected_records;
  lg["abandoned_sessions"] = log.abandoned_sessions;
  lg["unknown_restaurant"] = log.unknown_restaurant;
  lg["short_sessions"] = log.short_sessions;
  lg["dropped_users"] = log.dropped_users;
  lg["sessions_kept"] = log.sessions_kept;
  lg["users_kept"] = log.users_kept;
  lg["messages"] = log.messages;
  write_json(out_path(spec, "ingest_log.json"), lg);
  std::cout << "ingest: " << ds.users.size() << " users kept from " << dir << ", dataset.json written to "
            << spec.experiment.out_dir << "\n";
  return 0;
}

int cmd_fit(const RunSpec& spec, std::uint64_t seed) {
  const prefbandit::Dataset ds = load_data(spec);
  const prefbandit::FitReport report =
      prefbandit::fit_population(ds, spec.experiment.fit, prefbandit::derive_seed(seed, "offline-fit"));
  Json out;
  out["d"] = report.d;
  out["failures"] = report.failures;
  out["anchoring_negative"] = report.anchoring_negative;
  out["anchoring_positive"] = report.anchoring_positive;
  Json users = Json::object();
  for (const auto& [uid, fo] : report.by_user) {
    Json u;
    u["theta"] = fo.theta;
    u["objective"] = fo.objective;
    u["epochs"] = fo.epochs;
    u["converged"] = fo.converged;
    u["ok"] = fo.ok;
    if (!fo.ok) u["message"] = fo.message;
    users[std::to_string(uid)] = u;
  }
  out["by_user"] = users;
  write_json(out_path(spec, "fit.json"), out);
  std::cout << "fit: " << report.by_user.size() << " users, " << report.failures
            << " failures, anchoring sign -/+: " << report.anchoring_negative << "/"
            << report.anchoring_positive << "\n";
  return 0;
}

int cmd_cluster(const RunSpec& spec, std::uint64_t seed) {
  const prefbandit::Dataset ds = load_data(spec);
  if (spec.fit_path.empty())
    throw CliError(2, "config_error", "cluster needs fit=PATH pointing at a fit.json");
  std::ifstream in(spec.fit_path);
  if (!in) throw CliError(1, "io_error", "cannot open " + spec.fit_path);
  Json fj = Json::parse(in, nullptr, true);
  std::map<int, prefbandit::PreferenceVector> thetas;
  for (const auto& [uid, u] : fj.at("by_user").items())
    if (u.at("ok").get<bool>())
      thetas[std::stoi(uid)] = u.at("theta").get<prefbandit::Vec>();

  prefbandit::ClusterMode mode;
  if (spec.cluster_mode == "loss_guided") mode = prefbandit::ClusterMode::loss_guided;
  else if (spec.cluster_mode == "plain_l2") mode = prefbandit::ClusterMode::plain_l2;
  else throw CliError(2, "config_error", "cluster_mode must be loss_guided or plain_l2");

  int K = spec.experiment.K;
  Json out;
  if (!spec.select_k_candidates.empty()) {
    const prefbandit::SelectKResult sel = prefbandit::select_k(
        ds, spec.select_k_candidates, spec.experiment.fit, spec.experiment.eta,
        prefbandit::derive_seed(seed, "select-k"));
    K = sel.best_k;
    Json scores = Json::object();
    for (const auto& [k, s] : sel.score_by_k) scores[std::to_string(k)] = s;
    out["select_k"] = {{"best_k", sel.best_k}, {"score_by_k", scores}};
  }
  const prefbandit::ClusterModel model =
      prefbandit::cluster_fit(ds, thetas, K, mode, prefbandit::derive_seed(seed, "cluster"));
  out["K"] = model.K;
  out["mode"] = spec.cluster_mode;
  out["centroids"] = model.centroids;
  Json labels = Json::object();
  for (const auto& [uid, k] : model.labels) labels[std::to_string(uid)] = k;
  out["labels"] = labels;
  write_json(out_path(spec, "cluster.json"), out);
  std::cout << "cluster: K " << model.K << " (" << spec.cluster_mode << "), labels for "
            << model.labels.size() << " users\n";
  return 0;
}

int cmd_run(const RunSpec& spec) {
  prefbandit::ExperimentConfig cfg = spec.experiment;
  prefbandit::Dataset ds;
  const prefbandit::Dataset* data = nullptr;
  if (cfg.scenario == "restaurant") {
    if (!spec.data_path.empty()) {
      ds = load_data(spec);
      data = &ds;
    } else if (spec.synth_fixture) {
      std::string dir = cfg.sessions_dir.empty() ? out_path(spec, "fixture") : cfg.sessions_dir;
      if (!std::filesystem::exists(std::filesystem::path(dir) / "restaurants.tsv"))
        prefbandit::write_synthetic_fixture(dir, prefbandit::FixtureConfig{},
                                            cfg.seeds.empty() ? 1 : cfg.seeds.front());
      cfg.sessions_dir = dir;
    }
  }
  const prefbandit::ExperimentResult result = prefbandit::run_experiment(cfg, data);
  prefbandit::emit_outputs(result, cfg.out_dir);
  std::cout << "run: scenario " << cfg.scenario << ", " << cfg.algorithms.size()
            << " algorithms x " << cfg.seeds.size() << " seeds -> " << cfg.out_dir << "\n";
  for (const std::string& name : cfg.algorithms) {
    std::printf("  %-24s final mean regret %10.3f (raw loss %10.3f)\n", name.c_str(),
                prefbandit::final_mean_regret(result, name, false),
                prefbandit::final_mean_regret(result, name, true));
  }
  return 0;
}

int cmd_bounds(const RunSpec& spec) {
  const prefbandit::BoundParams& b = spec.bounds;
  const prefbandit::BoundCompareResult cmp =
      prefbandit::bound_compare(b.N, b.T_grid, b.K, b.A, b.d, b.l, b.C, b.delta);
  Json out;
  out["params"] = {{"N", b.N}, {"K", b.K}, {"A", b.A}, {"d", b.d},
                   {"l_centroids", b.l}, {"C", b.C}, {"delta", b.delta}};
  out["threshold_T"] = cmp.threshold;
  out["crossed"] = cmp.crossed;
  if (cmp.crossed) out["crossover_T"] = cmp.crossover_T;
  Json table = Json::array();
  for (const auto& p : cmp.table)
    table.push_back({{"T", p.T}, {"ewc", p.ewc}, {"linucb", p.linucb}, {"winner", p.winner}});
  out["table"] = table;
  if (b.has_gmm) {
    out["gmm_l_centroids"] = prefbandit::gmm_l_centroids(b.gmm_L, b.gmm_eps, b.gmm_sigma2, b.gmm_N,
                                                         b.gmm_pis, b.gmm_traces);
  }
  out["note"] = "all logarithms natural; base-2 logs would scale the clustered bound by sqrt(ln 2) "
                "and move the crossover accordingly";
  write_json(out_path(spec, "bounds.json"), out);

  std::ostringstream txt;
  txt << "clustered-expert bound vs contextual-bandit bound\n";
  txt << "N=" << b.N << " K=" << b.K << " A=" << b.A << " d=" << b.d << " l=" << b.l
      << " C=" << b.C << " delta=" << b.delta << "\n";
  txt << "threshold T = ((C-2)/l)^2 = " << cmp.threshold << "\n";
  for (const auto& p : cmp.table)
    txt << "  T=" << p.T << "  clustered=" << p.ewc << "  bandit=" << p.linucb << "  winner="
        << p.winner << "\n";
  if (cmp.crossed) txt << "first grid point where the bandit bound wins: T=" << cmp.crossover_T << "\n";
  else txt << "the bandit bound never wins on this grid\n";
  if (b.has_gmm) txt << "mixture-model centroid displacement l = " << out["gmm_l_centroids"].get<double>() << "\n";
  txt << "note: natural logarithms throughout\n";
  write_text(out_path(spec, "bounds.txt"), txt.str());
  std::cout << txt.str();
  return 0;
}

int cmd_probe(const RunSpec& spec, std::uint64_t seed) {
  const prefbandit::ProbeParams& p = spec.probe;
  const prefbandit::ProbeResult res = prefbandit::sample_complexity_probe(
      p.d, p.T_grid, p.trials, seed, p.signal_gain);
  std::string csv = "T,mean_direction_error\n";
  bool decreasing = true;
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& [T, err] : res.mean_error_by_T) {
    csv += std::to_string(T) + "," + prefbandit::detail::fmt_double(err) + "\n";
    if (err >= prev) decreasing = false;
    prev = err;
  }
  write_text(out_path(spec, "probe.csv"), csv);
  std::cout << csv;
  std::cout << (decreasing ? "error strictly decreases with the horizon\n"
                           : "error is NOT strictly decreasing\n");
  return decreasing ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"preference-clustered recommendation toolkit"};
  app.require_subcommand(1);

  std::string config_path, override_out, override_scenario, override_data;
  std::uint64_t seed = 1;
  bool seed_given = false;
  double override_beta = 0.0;
  bool beta_given = false;

  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--seed", seed, "base seed")->each([&](const std::string&) { seed_given = true; });
  app.add_option("--out", override_out, "output directory (overrides config)");
  app.add_option("--scenario", override_scenario, "travel | restaurant (overrides config)");
  app.add_option("--beta", override_beta, "anchoring strength (overrides config)")
      ->each([&](const std::string&) { beta_given = true; });
  app.add_option("--data", override_data, "dataset JSON path (overrides config)");

  auto* c_generate = app.add_subcommand("generate", "synthesize a travel population");
  auto* c_ingest = app.add_subcommand("ingest", "parse restaurant session logs");
  auto* c_fit = app.add_subcommand("fit", "offline per-user fitting");
  auto* c_cluster = app.add_subcommand("cluster", "cluster fitted vectors into experts");
  auto* c_run = app.add_subcommand("run", "full experiment");
  auto* c_bounds = app.add_subcommand("bounds", "regret-bound calculators");
  auto* c_probe = app.add_subcommand("probe-sample-complexity", "recovery error vs horizon");
  for (CLI::App* sub : {c_generate, c_ingest, c_fit, c_cluster, c_run, c_bounds, c_probe})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    nlohmann::ordered_json err;
    err["error"] = {{"type", "usage_error"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  }

  try {
    RunSpec spec;
    if (!config_path.empty()) spec = prefbandit::load_run_spec(config_path);
    if (!override_out.empty()) spec.experiment.out_dir = override_out;
    if (!override_scenario.empty()) spec.experiment.scenario = override_scenario;
    if (!override_data.empty()) spec.data_path = override_data;
    if (beta_given) spec.experiment.beta = override_beta;
    if (seed_given) spec.experiment.seeds = {seed};

    if (c_generate->parsed()) return cmd_generate(spec, seed);
    if (c_ingest->parsed()) return cmd_ingest(spec, seed);
    if (c_fit->parsed()) return cmd_fit(spec, seed);
    if (c_cluster->parsed()) return cmd_cluster(spec, seed);
    if (c_run->parsed()) return cmd_run(spec);
    if (c_bounds->parsed()) return cmd_bounds(spec);
    if (c_probe->parsed()) return cmd_probe(spec, seed);
    return 2;
  } catch (const CliError& e) {
    nlohmann::ordered_json err;
    err["error"] = {{"type", e.kind}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return e.exit_code;
  } catch (const std::invalid_argument& e) {
    nlohmann::ordered_json err;
    err["error"] = {{"type", "invalid_argument"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    nlohmann::ordered_json err;
    err["error"] = {{"type", "runtime_error"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
