#include "dlmtrial/service.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <fstream>
#include <latch>
#include <thread>

#include "dlmtrial/event_log.hpp"
#include "tmpdir.hpp"

using namespace dlmtrial;
using nlohmann::json;

namespace {

const json kConfig = {{"budget", 30}, {"omega", 0.1}, {"c_ta", 1.0}, {"c_tb", 1e-6}, {"seed", 31}};

// Server on an ephemeral localhost port for the lifetime of the fixture.
class Http : public ::testing::Test {
 protected:
  void SetUp() override {
    store_ = std::make_unique<TrialStore>(dir_.path());
    install_routes(server_, *store_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  httplib::Client client() { return httplib::Client("127.0.0.1", port_); }

  std::string create() {
    auto res = client().Post("/trials", kConfig.dump(), "application/json");
    EXPECT_EQ(res->status, 201);
    return json::parse(res->body)["trial_id"];
  }

  TempDir dir_;
  std::unique_ptr<TrialStore> store_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(TrialStore, LifecycleAndRevisions) {
  TempDir dir;
  TrialStore store(dir.path());
  const Mutated c = store.create(kConfig);
  const std::string id = c.body["trial_id"];
  EXPECT_EQ(c.revision, 1);
  const Mutated e = store.enroll(id);
  EXPECT_EQ(e.revision, 2);
  EXPECT_EQ(e.body["patient_index"], 1);
  const Mutated o = store.record_outcome(id, {{"y", 1.5}});
  EXPECT_EQ(o.revision, 3);
  EXPECT_EQ(o.body["phase"], "awaiting_enroll");
  EXPECT_EQ(o.body["recommendation"], "continue");
  EXPECT_TRUE(o.body["bf01"].is_null());
  EXPECT_EQ(store.state(id)["t"], 1);
}

TEST(TrialStore, ErrorsCarryStatus) {
  TempDir dir;
  TrialStore store(dir.path());
  auto status_of = [](auto&& f) {
    try {
      f();
    } catch (const ServiceError& e) {
      return e.status();
    }
    return 0;
  };
  EXPECT_EQ(status_of([&] { store.enroll("nope"); }), 404);
  EXPECT_EQ(status_of([&] { store.create({{"budget", 1}}); }), 422);
  EXPECT_EQ(status_of([&] { store.create({{"budget", 10}, {"truth", {{"mu_a", 0}, {"mu_b", 1}, {"sigma", 1}}}}); }), 422);
  EXPECT_EQ(status_of([&] { store.create({{"omega", -1}}); }), 422);
  const std::string id = store.create(kConfig).body["trial_id"];
  EXPECT_EQ(status_of([&] { store.record_outcome(id, {{"y", 1}}); }), 409);
  store.enroll(id);
  EXPECT_EQ(status_of([&] { store.enroll(id); }), 409);
  EXPECT_EQ(status_of([&] { store.record_outcome(id, {{"y", "nan"}}); }), 422);
  EXPECT_EQ(status_of([&] { store.record_outcome(id, {{"y", "x"}}); }), 422);
  EXPECT_EQ(status_of([&] { store.record_outcome(id, {{"z", 1}}); }), 422);
  EXPECT_EQ(status_of([&] { store.record_outcome(id, {{"y", 1}}, 1); }), 409);
  EXPECT_EQ(store.revision(id), 2);
  EXPECT_NO_THROW(store.record_outcome(id, {{"y", "0.25"}}, 2));
}

TEST(TrialStore, SurvivesRestart) {
  TempDir dir;
  std::string id;
  json before;
  std::string log_before;
  {
    TrialStore store(dir.path());
    id = store.create(kConfig).body["trial_id"];
    for (int i = 0; i < 6; ++i) {
      store.enroll(id);
      store.record_outcome(id, {{"y", 0.5 * i - 1}});
    }
    store.enroll(id);
    before = store.state(id);
    log_before = store.export_log(id);
  }
  TrialStore again(dir.path());
  EXPECT_EQ(again.state(id), before);
  EXPECT_EQ(again.export_log(id), log_before);
  EXPECT_EQ(again.state(id)["phase"], "awaiting_outcome");
  EXPECT_EQ(again.revision(id), 14);
  EXPECT_EQ(again.list()["trials"].size(), 1u);
  EXPECT_NO_THROW(again.record_outcome(id, {{"y", 2.0}}));
}

TEST(TrialStore, DropsTornTail) {
  TempDir dir;
  std::string id;
  {
    TrialStore store(dir.path());
    id = store.create(kConfig).body["trial_id"];
    store.enroll(id);
    store.record_outcome(id, {{"y", 1.0}});
  }
  {
    std::ofstream f(dir / ("trials/" + id + ".log"), std::ios::app);
    f << "!enroll,2\n2,A,0.3";
  }
  TrialStore again(dir.path());
  EXPECT_EQ(again.state(id)["phase"], "awaiting_outcome");
  again.record_outcome(id, {{"y", -1.0}});
  TrialStore third(dir.path());
  EXPECT_EQ(third.state(id)["t"], 2);
}

TEST_F(Http, FullSession) {
  const std::string id = create();
  auto c = client();
  for (int i = 0; i < 10; ++i) {
    auto e = c.Post("/trials/" + id + "/enroll");
    ASSERT_EQ(e->status, 200) << e->body;
    const json ej = json::parse(e->body);
    EXPECT_EQ(ej["patient_index"], i + 1);
    EXPECT_TRUE(ej["arm"] == "A" || ej["arm"] == "B");
    EXPECT_TRUE(ej["forecasts"].contains("Q_B"));
    auto o = c.Post("/trials/" + id + "/outcome", json{{"y", 0.1 * i}}.dump(), "application/json");
    ASSERT_EQ(o->status, 200) << o->body;
    EXPECT_EQ(o->get_header_value("ETag"), "\"" + std::to_string(3 + 2 * i) + "\"");
  }
  auto s = c.Get("/trials/" + id + "/state");
  ASSERT_EQ(s->status, 200);
  const json sj = json::parse(s->body);
  EXPECT_EQ(sj["t"], 10);
  EXPECT_EQ(sj["bf01"].size(), 10u);
  EXPECT_EQ(sj["revision"], 21);
  EXPECT_EQ(sj["n_A"].get<int>() + sj["n_B"].get<int>(), 10);

  auto x = c.Get("/trials/" + id + "/export");
  ASSERT_EQ(x->status, 200);
  const ReplayReport rep = replay(parse_event_log(x->body));
  EXPECT_TRUE(rep.match) << rep.mismatch;
  EXPECT_EQ(rep.result.final_state.m(0), sj["m"][0].get<double>());
  EXPECT_EQ(rep.result.final_state.C(1, 1), sj["C"][1][1].get<double>());

  auto l = c.Get("/trials");
  EXPECT_EQ(json::parse(l->body)["trials"][0]["trial_id"], id);
}

TEST_F(Http, StatusCodes) {
  auto c = client();
  EXPECT_EQ(c.Post("/trials/none/enroll")->status, 404);
  EXPECT_EQ(c.Get("/trials/none/state")->status, 404);
  EXPECT_EQ(c.Post("/trials", "{not json", "application/json")->status, 422);
  EXPECT_EQ(c.Post("/trials", json{{"budget", 1}}.dump(), "application/json")->status, 422);
  const std::string id = create();
  EXPECT_EQ(c.Post("/trials/" + id + "/outcome", R"({"y":1})", "application/json")->status, 409);
  EXPECT_EQ(c.Post("/trials/" + id + "/enroll")->status, 200);
  EXPECT_EQ(c.Post("/trials/" + id + "/enroll")->status, 409);
  EXPECT_EQ(c.Post("/trials/" + id + "/outcome", R"({"y":"inf"})", "application/json")->status, 422);
  httplib::Headers stale{{"If-Match", "\"1\""}};
  EXPECT_EQ(c.Post("/trials/" + id + "/outcome", stale, R"({"y":1})", "application/json")->status, 409);
  httplib::Headers fresh{{"If-Match", "\"2\""}};
  EXPECT_EQ(c.Post("/trials/" + id + "/outcome", fresh, R"({"y":1})", "application/json")->status, 200);
}

TEST_F(Http, ConcurrentConditionalEnrollOneWins) {
  for (int round = 0; round < 5; ++round) {
    const std::string id = create();
    std::latch go(2);
    int codes[2] = {0, 0};
    auto racer = [&](int k) {
      auto c = client();
      httplib::Headers h{{"If-Match", "\"1\""}};
      go.arrive_and_wait();
      codes[k] = c.Post("/trials/" + id + "/enroll", h, "", "application/json")->status;
    };
    std::thread a(racer, 0), b(racer, 1);
    a.join();
    b.join();
    EXPECT_EQ(std::min(codes[0], codes[1]), 200);
    EXPECT_EQ(std::max(codes[0], codes[1]), 409);
    EXPECT_EQ(store_->revision(id), 2);
  }
}
