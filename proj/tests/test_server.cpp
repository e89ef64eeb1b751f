#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <httplib.h>

#include "sar/session/replay.hpp"
#include "sar/session/server.hpp"
#include "sar/vision/image_io.hpp"

using namespace sar;
using namespace sar::session;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class WsClient {
 public:
  WsClient(unsigned short port, const std::string& target) : ws_(ioc_) {
    boost::asio::ip::tcp::resolver resolver(ioc_);
    boost::asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1:" + std::to_string(port), target);
  }

  json next() {
    boost::beast::flat_buffer buf;
    ws_.read(buf);
    return json::parse(boost::beast::buffers_to_string(buf.data()));
  }

  ~WsClient() {
    boost::beast::error_code ec;
    ws_.close(boost::beast::websocket::close_code::normal, ec);
  }

 private:
  boost::asio::io_context ioc_;
  boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
};

struct Fixture : ::testing::Test {
  fs::path static_dir;
  std::unique_ptr<SessionManager> mgr;
  std::unique_ptr<Server> server;
  std::unique_ptr<httplib::Client> http;

  void SetUp() override {
    static_dir = fs::temp_directory_path() / ("sar_static_" + std::to_string(std::random_device{}()));
    fs::create_directories(static_dir);
    std::ofstream(static_dir / "index.html") << "<html>console</html>";
    ServiceConfig cfg;
    cfg.port = 0;
    cfg.dialogue_mode = DialogueMode::Inline;
    cfg.static_dir = static_dir;
    mgr = std::make_unique<SessionManager>(cfg);
    server = std::make_unique<Server>(*mgr);
    server->start();
    http = std::make_unique<httplib::Client>("127.0.0.1", server->port());
  }

  void TearDown() override {
    http.reset();
    server->stop();
    server.reset();
    mgr.reset();
    fs::remove_all(static_dir);
  }

  std::string create() {
    auto r = http->Post("/sessions");
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, 201);
    return json::parse(r->body)["id"];
  }

  json post_event(const std::string& id, const json& e, int expected = 200) {
    auto r = http->Post("/sessions/" + id + "/events", e.dump(), "application/json");
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, expected) << r->body;
    return json::parse(r->body);
  }

  json get(const std::string& path, int expected = 200) {
    auto r = http->Get(path);
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, expected) << r->body;
    return json::parse(r->body);
  }
};

json ev(std::int64_t t, const std::string& type, json extra = json::object()) {
  extra["type"] = type;
  extra["t"] = t;
  return extra;
}

}  // namespace

TEST_F(Fixture, CreateAndReadState) {
  const auto id = create();
  const auto s = get("/sessions/" + id + "/state");
  EXPECT_EQ(s["state"], "Idle");
  EXPECT_EQ(s["hw"]["left_arm_deg"], 0.0);
  EXPECT_EQ(s["seq"], 0);
  const auto list = get("/sessions");
  ASSERT_EQ(list["sessions"].size(), 1u);
  EXPECT_EQ(list["sessions"][0]["id"], id);
  EXPECT_TRUE(get("/healthz")["ok"]);
  EXPECT_FALSE(get("/table")["rows"].empty());
}

TEST_F(Fixture, ErrorsMapToStatusCodes) {
  const auto nf = get("/sessions/doesnotexist/state", 404);
  EXPECT_EQ(nf["error"]["kind"], "not_found");
  const auto id = create();
  EXPECT_EQ(post_event(id, json{{"type", "warp"}}, 400)["error"]["kind"], "parse");
  auto raw = http->Post("/sessions/" + id + "/events", "{nope", "application/json");
  EXPECT_EQ(raw->status, 400);
  auto frame = http->Post("/sessions/" + id + "/frame", vision::encode_pgm(vision::GrayFrame(32, 32, 9)),
                          "image/x-portable-graymap");
  EXPECT_EQ(frame->status, 409);  // no cascade configured
  auto del = http->Delete("/sessions/" + id);
  EXPECT_EQ(del->status, 200);
  EXPECT_EQ(post_event(id, ev(1, "tick", {{"dt_ms", 5}}), 410)["error"]["kind"], "gone");
  auto options = http->Options("/sessions");
  EXPECT_EQ(options->status, 204);
  EXPECT_EQ(options->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST_F(Fixture, IdempotencyHeaderDeduplicates) {
  const auto id = create();
  const httplib::Headers h{{"Idempotency-Key", "slider-1"}};
  for (int i = 0; i < 3; ++i) {
    auto r = http->Post("/sessions/" + id + "/events", h, ev(0, "distance", {{"cm", 42}}).dump(), "application/json");
    ASSERT_EQ(r->status, 200);
  }
  EXPECT_EQ(get("/sessions/" + id + "/state")["events"], 1);
}

TEST_F(Fixture, ConsoleFlowOverHttpAndStream) {
  const auto id = create();
  WsClient ws(server->port(), "/sessions/" + id + "/stream");
  const auto first = ws.next();
  EXPECT_EQ(first["type"], "snapshot");
  EXPECT_EQ(first["state"], "Idle");

  post_event(id, ev(0, "face_detected", {{"box", {32, 32, 64, 64}}}));
  post_event(id, ev(10, "face_detected", {{"box", {32, 32, 64, 64}}}));
  for (int i = 0; i < 3; ++i) post_event(id, ev(100 + i, "emotion", {{"label", "sad"}, {"score", 0.9}}));
  post_event(id, ev(200, "tick", {{"dt_ms", 50}}));
  post_event(id, ev(300, "distance", {{"cm", 30}}));
  EXPECT_EQ(get("/sessions/" + id + "/state")["state"], "AwaitingConsent");

  // the nod button: the server renders a burst and runs the real tracker
  const auto nod = post_event(id, {{"type", "synthetic_gesture"}, {"kind", "nod"}});
  EXPECT_EQ(nod["verdict"]["kind"], "nod");
  EXPECT_EQ(nod["record"]["state_after"], "Hugging");

  // every applied event is pushed in order; the last one shows Hugging
  json last;
  std::uint64_t expect_seq = 1;
  bool saw_offer = false;
  while (expect_seq <= nod["record"]["seq"].get<std::uint64_t>()) {
    last = ws.next();
    ASSERT_EQ(last["type"], "update");
    ASSERT_EQ(last["seq"], expect_seq++);
    for (const auto& u : last["transcript_delta"]) saw_offer = saw_offer || u["role"] == "robot";
  }
  EXPECT_EQ(last["state"], "Hugging");
  EXPECT_EQ(last["verdicts"]["gesture"]["kind"], "nod");
  EXPECT_TRUE(saw_offer);

  for (int i = 0; i < 8; ++i) post_event(id, ev(2000 + 500 * i, "tick", {{"dt_ms", 500}}));
  post_event(id, ev(7000, "user_utterance", {{"text", "yes please"}}));
  post_event(id, ev(8000, "user_utterance", {{"text", "Tell me a story about space."}}));
  const auto state = get("/sessions/" + id + "/state");
  EXPECT_EQ(state["state"], "Conversing");
  EXPECT_EQ(state["memory"]["hugs_completed"], 1);
  EXPECT_EQ(state["hw"]["snack_count"], 4);

  const auto metrics = get("/sessions/" + id + "/metrics");
  EXPECT_EQ(metrics["turns"].size(), 1u);
  EXPECT_EQ(metrics["summary"]["turns"], 1);

  auto log = http->Get("/sessions/" + id + "/log");
  ASSERT_EQ(log->status, 200);
  const auto parsed = parse_log(log->body);
  EXPECT_EQ(parsed.records.size(), state["events"].get<std::size_t>());
  EXPECT_TRUE(replay(parsed).divergences.empty());
}

TEST_F(Fixture, RapidPushesEndOnFinalState) {
  const auto id = create();
  WsClient ws(server->port(), "/sessions/" + id + "/stream");
  (void)ws.next();
  for (int i = 0; i < 100; ++i) post_event(id, ev(i, "distance", {{"cm", 400 - 3 * i}}));
  const auto final_state = get("/sessions/" + id + "/state");
  json last;
  for (int i = 0; i < 100; ++i) last = ws.next();
  EXPECT_EQ(last["seq"], final_state["seq"]);
  EXPECT_EQ(last["hw"], final_state["hw"]);
  EXPECT_EQ(last["state"], final_state["state"]);
}

TEST_F(Fixture, StreamForUnknownSessionReportsError) {
  WsClient ws(server->port(), "/sessions/nosuch/stream");
  EXPECT_EQ(ws.next()["error"]["kind"], "not_found");
}

TEST_F(Fixture, ServesStaticConsole) {
  auto r = http->Get("/");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "<html>console</html>");
  EXPECT_EQ(http->Get("/../etc/passwd")->status, 404);
}
