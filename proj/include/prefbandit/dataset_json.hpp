#pragma once

// Canonical dataset interchange format, shared by the generator, the session
// ingester, and the experiment harness:
//
//   { "d": int, "D": int,
//     "users": [ { "user_id": int, "context": [double x D],
//                  "rounds": [ { "options": [[double x d] x A],
//                                "recommended": int, "chosen": int } ] } ] }
//
// Option indices are 1-based in files and 0-based in memory.

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "prefbandit/core.hpp"

namespace prefbandit {

using Json = nlohmann::ordered_json;

inline Json dataset_to_json(const Dataset& ds) {
  validate_dataset(ds);
  Json j;
  j["d"] = ds.d;
  j["D"] = ds.D;
  j["users"] = Json::array();
  for (const UserRecord& u : ds.users) {
    Json ju;
    ju["user_id"] = u.user_id;
    ju["context"] = u.context.features;
    ju["rounds"] = Json::array();
    for (const InteractionRound& r : u.rounds) {
      Json jr;
      jr["options"] = Json::array();
      for (const OptionContext& o : r.options) jr["options"].push_back(o.features);
      jr["recommended"] = r.recommended + 1;
      jr["chosen"] = r.chosen + 1;
      ju["rounds"].push_back(std::move(jr));
    }
    j["users"].push_back(std::move(ju));
  }
  return j;
}

inline Dataset dataset_from_json(const Json& j) {
  Dataset ds;
  ds.d = j.at("d").get<int>();
  ds.D = j.at("D").get<int>();
  for (const Json& ju : j.at("users")) {
    UserRecord u;
    u.user_id = ju.at("user_id").get<int>();
    u.context.features = ju.at("context").get<Vec>();
    int round_index = 1;
    for (const Json& jr : ju.at("rounds")) {
      InteractionRound r;
      r.user_id = u.user_id;
      r.round_index = round_index++;
      for (const Json& jo : jr.at("options")) r.options.push_back({jo.get<Vec>()});
      r.recommended = jr.at("recommended").get<int>() - 1;
      r.chosen = jr.at("chosen").get<int>() - 1;
      u.rounds.push_back(std::move(r));
    }
    ds.users.push_back(std::move(u));
  }
  validate_dataset(ds);
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  out << dataset_to_json(ds).dump(1) << '\n';
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  Json j;
  in >> j;
  return dataset_from_json(j);
}

}  // namespace prefbandit
