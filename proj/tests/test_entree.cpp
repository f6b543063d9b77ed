#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "prefbandit/dataset_json.hpp"
#include "prefbandit/entree.hpp"

namespace pb = prefbandit;
namespace fs = std::filesystem;

namespace {

// Each test works in its own scratch directory under the build tree.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name) : path_(fs::temp_directory_path() / ("prefbandit_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path_ / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
  std::string dir() const { return path_.string(); }

 private:
  fs::path path_;
};

const char* kRestaurants =
    "1\tgood\texcellent\tunder15\tamerican\tAlma\n"
    "2\tfair\tfair\t15to30\tseafood\tBayside\n"
    "3\tnear_perfect\tgood\tover50\tfrench\tChez Trois\n"
    "4\texcellent\textraordinary\t30to50\titalian\tDomani\n";

}  // namespace

TEST(EncodeOption, FrozenScalesAndOneHot) {
  pb::RestaurantRecord r;
  r.quality = 1;   // good -> 0.25
  r.service = 2;   // excellent -> 0.5
  r.price = 3;     // over50 -> 1.0
  r.style = 2;     // french
  const pb::Vec x = pb::encode_option(r);
  ASSERT_EQ(x.size(), 9u);
  EXPECT_EQ(x[0], 0.25);
  EXPECT_EQ(x[1], 0.5);
  EXPECT_EQ(x[2], 1.0);
  EXPECT_EQ(x[3], 0.0);
  EXPECT_EQ(x[5], 1.0);
  EXPECT_EQ(x[8], 0.0);

  r.style = 5;  // other bucket
  EXPECT_EQ(pb::encode_option(r)[8], 1.0);

  r.quality = 5;
  EXPECT_THROW(pb::encode_option(r), std::invalid_argument);
  r.quality = 1;
  r.price = -1;
  EXPECT_THROW(pb::encode_option(r), std::invalid_argument);
}

TEST(ParseRestaurants, AcceptsRejectsAndFoldsStyles) {
  ScratchDir tmp("restaurants");
  const std::string path = tmp.file("restaurants.tsv",
                                    "# comment line\n"
                                    "\n"
                                    "1\tgood\texcellent\tunder15\tamerican\tAlma\n"
                                    "2\tfair\tfair\t15to30\tseafood\tBayside\n"
                                    "3\tsuperb\tgood\tover50\tfrench\tBad quality token\n"
                                    "4\texcellent\tgood\tunder15\n"
                                    "x\tgood\tgood\tunder15\tasian\tBad id\n"
                                    "5\tgood\tgood\tunder15\tlatin\n");
  pb::IngestLog log;
  const auto table = pb::parse_restaurants(path, log);
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table.at(1).name, "Alma");
  EXPECT_EQ(table.at(1).style, 0);
  EXPECT_EQ(table.at(2).style, 5);  // "seafood" is not a named style
  EXPECT_EQ(table.at(5).style, 4);
  EXPECT_EQ(table.at(5).name, "");  // name column is optional
  EXPECT_EQ(log.rejected_records, 1);  // "superb"
  EXPECT_EQ(log.malformed_lines, 2);   // short row + bad id
  EXPECT_EQ(log.messages.size(), 3u);
}

TEST(ParseSessions, RoundAssemblyFromTrails) {
  ScratchDir tmp("sessions_basic");
  tmp.file("restaurants.tsv", kRestaurants);
  // Four sessions for one origin: enough rounds to keep the user.
  tmp.file("sessions-a.txt",
           "1996-01-01T10:00:00\tcity1\t1\t2\n"          // no trail: rec = entry
           "1996-01-02T10:00:00\tcity1\t1\t3v\t2s\t4\n"  // trail: rec = seq[size-2] = 2
           "1996-01-03T10:00:00\tcity1\t2\t2\t3\n"       // duplicate entry collapses
           "1996-01-04T10:00:00\tcity1\t4\t1\t-1\n"      // abandoned
           "1996-01-05T10:00:00\tcity1\t3\t1\n");
  pb::IngestLog log;
  const pb::Dataset ds = pb::ingest_directory(tmp.dir(), log);

  ASSERT_EQ(ds.users.size(), 1u);
  EXPECT_EQ(ds.d, 9);
  EXPECT_EQ(ds.D, 1);
  EXPECT_EQ(ds.users[0].context.features, pb::Vec{1.0});
  ASSERT_EQ(ds.users[0].rounds.size(), 4u);
  EXPECT_EQ(log.abandoned_sessions, 1);
  EXPECT_EQ(log.sessions_kept, 4);

  // Session 1: options (1, 2), rec = entry 1, chosen = 2.
  const auto& r1 = ds.users[0].rounds[0];
  ASSERT_EQ(r1.options.size(), 2u);
  EXPECT_EQ(r1.recommended, 0);
  EXPECT_EQ(r1.chosen, 1);

  // Session 2: options in first-appearance order (1, 3, 2, 4); action letters
  // on trail tokens are stripped; rec is the last trail suggestion (2).
  const auto& r2 = ds.users[0].rounds[1];
  ASSERT_EQ(r2.options.size(), 4u);
  EXPECT_EQ(r2.recommended, 2);
  EXPECT_EQ(r2.chosen, 3);

  // Session 3: 2 appears twice but is one option; rec token is the middle 2.
  const auto& r3 = ds.users[0].rounds[2];
  ASSERT_EQ(r3.options.size(), 2u);
  EXPECT_EQ(r3.recommended, 0);
  EXPECT_EQ(r3.chosen, 1);
}

TEST(ParseSessions, RejectionsAndUserDrop) {
  ScratchDir tmp("sessions_reject");
  tmp.file("restaurants.tsv", kRestaurants);
  tmp.file("sessions-a.txt",
           "1996-01-01T10:00:00\tcityA\t1\t2\n"
           "1996-01-02T10:00:00\tcityA\t1\t3\n"
           "1996-01-03T10:00:00\tcityA\t99\t1\n"      // unknown restaurant
           "1996-01-04T10:00:00\tcityA\t1\t1x\t1\n"   // one distinct place only
           "1996-01-05T10:00:00\tcityA\t1x0\t2\t3\n"  // bad token: letter inside digits
           "1996-01-06T10:00:00\tcityA\t2\t4\n"
           "bad-line-without-enough-fields\n"
           "1996-01-01T09:00:00\tcityB\t1\t2\n"
           "1996-01-02T09:00:00\tcityB\t2\t3\n");
  pb::IngestLog log;
  const pb::Dataset ds = pb::ingest_directory(tmp.dir(), log);

  // cityA keeps 3 clean sessions; cityB has only 2 rounds and is dropped.
  ASSERT_EQ(ds.users.size(), 1u);
  EXPECT_EQ(ds.users[0].rounds.size(), 3u);
  EXPECT_EQ(log.unknown_restaurant, 1);
  EXPECT_EQ(log.short_sessions, 1);
  EXPECT_EQ(log.malformed_lines, 2);  // bad token line + short line
  EXPECT_EQ(log.dropped_users, 1);
  EXPECT_EQ(log.users_kept, 1);
}

TEST(ParseSessions, TimestampOrderingAndOriginIds) {
  ScratchDir tmp("sessions_order");
  tmp.file("restaurants.tsv", kRestaurants);
  // Out-of-file-order timestamps; two origins whose sorted order differs from
  // appearance order.
  tmp.file("sessions-a.txt",
           "1996-03-01T10:00:00\tzeta\t1\t2\n"
           "1996-01-01T10:00:00\tzeta\t2\t3\n"
           "1996-02-01T10:00:00\tzeta\t3\t4\n"
           "1996-01-01T10:00:00\talpha\t1\t2\n"
           "1996-01-02T10:00:00\talpha\t2\t3\n"
           "1996-01-03T10:00:00\talpha\t3\t4\n");
  pb::IngestLog log;
  const pb::Dataset ds = pb::ingest_directory(tmp.dir(), log);
  ASSERT_EQ(ds.users.size(), 2u);
  // Origins are assigned ids in lexicographic order.
  EXPECT_EQ(ds.users[0].user_id, 1);  // alpha
  EXPECT_EQ(ds.users[1].user_id, 2);  // zeta
  // zeta's rounds must be timestamp-sorted: Jan, Feb, Mar.
  const auto& z = ds.users[1].rounds;
  EXPECT_EQ(z[0].chosen, 1);  // Jan session chose restaurant 3 = option index 1
  EXPECT_EQ(z[1].round_index, 2);
  ASSERT_EQ(z.size(), 3u);
  EXPECT_EQ(z[2].recommended, 0);  // March session "1 2": rec = entry
}

TEST(ParseSessions, MultipleFilesInNameOrder) {
  ScratchDir tmp("sessions_multi");
  tmp.file("restaurants.tsv", kRestaurants);
  tmp.file("sessions-b.txt", "1996-01-02T10:00:00\tcity\t2\t3\n");
  tmp.file("sessions-a.txt",
           "1996-01-01T10:00:00\tcity\t1\t2\n"
           "1996-01-03T10:00:00\tcity\t3\t4\n");
  tmp.file("notes.txt", "ignored: does not match sessions*.txt\n");
  pb::IngestLog log;
  const pb::Dataset ds = pb::ingest_directory(tmp.dir(), log);
  ASSERT_EQ(ds.users.size(), 1u);
  ASSERT_EQ(ds.users[0].rounds.size(), 3u);
  EXPECT_EQ(log.sessions_kept, 3);
}

TEST(IngestDirectory, MissingInputsThrow) {
  ScratchDir tmp("sessions_missing");
  pb::IngestLog log;
  EXPECT_THROW(pb::ingest_directory(tmp.dir(), log), std::runtime_error);
  tmp.file("restaurants.tsv", kRestaurants);
  EXPECT_THROW(pb::ingest_directory(tmp.dir(), log), std::runtime_error);  // no session files
}

TEST(SplitUsers, DisjointDeterministicOrdered) {
  pb::Dataset ds;
  ds.d = 9;
  ds.D = 1;
  for (int i = 1; i <= 20; ++i) {
    pb::UserRecord u;
    u.user_id = i;
    u.context.features = {1.0};
    ds.users.push_back(u);
  }
  const auto [train, test] = pb::split_users(ds, 12, 5, 99);
  EXPECT_EQ(train.users.size(), 12u);
  EXPECT_EQ(test.users.size(), 5u);
  EXPECT_EQ(train.d, 9);
  EXPECT_EQ(test.D, 1);
  std::set<int> seen;
  for (const auto& u : train.users) seen.insert(u.user_id);
  for (const auto& u : test.users) ASSERT_EQ(seen.count(u.user_id), 0u);
  for (std::size_t i = 1; i < train.users.size(); ++i)
    EXPECT_LT(train.users[i - 1].user_id, train.users[i].user_id);
  for (std::size_t i = 1; i < test.users.size(); ++i)
    EXPECT_LT(test.users[i - 1].user_id, test.users[i].user_id);

  const auto [train2, test2] = pb::split_users(ds, 12, 5, 99);
  for (std::size_t i = 0; i < train.users.size(); ++i)
    EXPECT_EQ(train.users[i].user_id, train2.users[i].user_id);
  const auto [train3, test3] = pb::split_users(ds, 12, 5, 100);
  bool differs = false;
  for (std::size_t i = 0; i < train.users.size(); ++i)
    differs = differs || train.users[i].user_id != train3.users[i].user_id;
  EXPECT_TRUE(differs);

  EXPECT_THROW(pb::split_users(ds, 16, 5, 1), std::invalid_argument);
  EXPECT_THROW(pb::split_users(ds, 0, 5, 1), std::invalid_argument);
}

TEST(SyntheticFixture, RoundTripsThroughTheIngester) {
  ScratchDir tmp("fixture");
  pb::FixtureConfig cfg;
  cfg.n_users = 40;
  cfg.n_restaurants = 30;
  cfg.n_clusters = 4;
  const pb::FixtureSummary summary = pb::write_synthetic_fixture(tmp.dir(), cfg, 21);
  EXPECT_EQ(summary.users, 40);
  EXPECT_EQ(summary.restaurants, 30);
  EXPECT_GE(summary.sessions, 3LL * 40);

  pb::IngestLog log;
  const pb::Dataset ds = pb::ingest_directory(tmp.dir(), log);
  EXPECT_EQ(ds.d, 9);
  EXPECT_EQ(ds.D, 1);
  // The writer guarantees every generated user survives the T >= 3 filter.
  EXPECT_EQ(ds.users.size(), 40u);
  EXPECT_EQ(log.dropped_users, 0);
  EXPECT_EQ(log.malformed_lines, 0);
  EXPECT_NO_THROW(pb::validate_dataset(ds));
  for (const auto& u : ds.users) {
    EXPECT_GE(u.rounds.size(), 3u);
    EXPECT_LE(u.rounds.size(), 105u);
    for (const auto& r : u.rounds) {
      EXPECT_GE(r.options.size(), 2u);
      EXPECT_LE(r.options.size(), 18u);
      EXPECT_GE(r.recommended, 0);
    }
  }
}

TEST(SyntheticFixture, SameSeedSameBytes) {
  ScratchDir a("fixture_a");
  ScratchDir b("fixture_b");
  pb::FixtureConfig cfg;
  cfg.n_users = 15;
  cfg.n_restaurants = 20;
  cfg.n_clusters = 3;
  pb::write_synthetic_fixture(a.dir(), cfg, 7);
  pb::write_synthetic_fixture(b.dir(), cfg, 7);

  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  for (const auto& e : fs::directory_iterator(a.dir())) {
    const std::string name = e.path().filename().string();
    SCOPED_TRACE(name);
    ASSERT_TRUE(fs::exists(fs::path(b.dir()) / name));
    EXPECT_EQ(slurp(e.path().string()), slurp((fs::path(b.dir()) / name).string()));
  }

  pb::IngestLog log_a, log_b;
  const pb::Dataset da = pb::ingest_directory(a.dir(), log_a);
  const pb::Dataset db = pb::ingest_directory(b.dir(), log_b);
  EXPECT_EQ(pb::dataset_to_json(da).dump(), pb::dataset_to_json(db).dump());
}
