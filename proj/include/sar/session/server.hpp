#pragma once

#include <atomic>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/bind_executor.hpp>
#include <boost/asio/dispatch.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/asio/thread_pool.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "sar/robot/machine.hpp"
#include "sar/session/session.hpp"
#include "sar/vision/image_io.hpp"

namespace sar::session {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

inline http::status status_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::NotFound: return http::status::not_found;
    case ErrorKind::Gone: return http::status::gone;
    case ErrorKind::Limit: return http::status::too_many_requests;
    case ErrorKind::State: return http::status::conflict;
    case ErrorKind::Parse:
    case ErrorKind::Value:
    case ErrorKind::Format:
    case ErrorKind::Shape:
    case ErrorKind::Size:
    case ErrorKind::Bounds:
    case ErrorKind::InsufficientData: return http::status::bad_request;
    case ErrorKind::Timeout: return http::status::gateway_timeout;
    case ErrorKind::Transport:
    case ErrorKind::Protocol: return http::status::bad_gateway;
    case ErrorKind::Config: return http::status::internal_server_error;
  }
  return http::status::internal_server_error;
}

inline nlohmann::json error_body(ErrorKind k, const std::string& message) {
  return {{"error", {{"kind", to_string(k)}, {"message", message}}}};
}

struct HttpReply {
  http::status status = http::status::ok;
  std::string body;
  std::string content_type = "application/json";
};

inline HttpReply json_reply(const nlohmann::json& j, http::status s = http::status::ok) {
  return {s, j.dump(), "application/json"};
}

inline std::string mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

/// Route table over SessionManager, independent of the transport so it can
/// be exercised directly.
class Api {
 public:
  explicit Api(SessionManager& mgr) : mgr_(mgr) {}

  HttpReply handle(http::verb method, const std::string& target, const std::string& body,
                   const std::optional<std::string>& idempotency_key) {
    try {
      return route(method, target, body, idempotency_key);
    } catch (const Error& e) {
      return json_reply(error_body(e.kind(), e.message()), status_for(e.kind()));
    } catch (const std::exception& e) {
      return json_reply(error_body(ErrorKind::State, e.what()), http::status::internal_server_error);
    }
  }

  [[nodiscard]] SessionManager& manager() noexcept { return mgr_; }

  /// Session id for a stream target, or nullopt when the path is not one.
  static std::optional<std::string> stream_target(const std::string& target) {
    static const std::regex re(R"(^/sessions/([A-Za-z0-9_-]+)/stream$)");
    std::smatch m;
    const auto path = strip_query(target);
    if (std::regex_match(path, m, re)) return m[1].str();
    return std::nullopt;
  }

  static std::string strip_query(const std::string& target) { return target.substr(0, target.find('?')); }

  static std::optional<std::string> query_param(const std::string& target, const std::string& key) {
    const auto q = target.find('?');
    if (q == std::string::npos) return std::nullopt;
    std::size_t pos = q + 1;
    while (pos <= target.size()) {
      const auto amp = target.find('&', pos);
      const auto part = target.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
      const auto eq = part.find('=');
      if (part.substr(0, eq) == key) return eq == std::string::npos ? std::string{} : part.substr(eq + 1);
      if (amp == std::string::npos) break;
      pos = amp + 1;
    }
    return std::nullopt;
  }

 private:
  static nlohmann::json parse_body(const std::string& body) {
    if (body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::Parse, "request body is not JSON");
    return j;
  }

  HttpReply route(http::verb method, const std::string& target, const std::string& body,
                  const std::optional<std::string>& idempotency_key) {
    static const std::regex session_re(R"(^/sessions/([A-Za-z0-9_-]+)(/[a-z]+)?$)");
    const auto path = strip_query(target);
    if (path == "/healthz") return json_reply({{"ok", true}});
    if (path == "/table" && method == http::verb::get) return json_reply(robot::transition_table_json());
    if (path == "/sessions") {
      if (method == http::verb::post) {
        auto s = mgr_.create();
        return json_reply({{"id", s->id()}, {"state", s->snapshot()["state"]}}, http::status::created);
      }
      if (method == http::verb::get) {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& id : mgr_.ids()) {
          const auto snap = mgr_.get(id)->snapshot();
          list.push_back({{"id", id}, {"state", snap["state"]}, {"ended", snap["ended"]}, {"seq", snap["seq"]}});
        }
        return json_reply({{"sessions", list}});
      }
    }
    std::smatch m;
    if (std::regex_match(path, m, session_re)) {
      auto s = mgr_.get(m[1].str());
      const std::string sub = m[2].matched ? m[2].str() : "";
      if (sub.empty() && method == http::verb::get) return json_reply(s->snapshot());
      if (sub.empty() && method == http::verb::delete_) {
        if (!s->ended()) s->submit({{"type", "operator"}, {"command", "end"}});
        return json_reply(s->snapshot());
      }
      if (sub == "/state" && method == http::verb::get) return json_reply(s->snapshot());
      if (sub == "/metrics" && method == http::verb::get) return json_reply(s->metrics_json());
      if (sub == "/log" && method == http::verb::get) return {http::status::ok, s->log_text(), "application/x-ndjson"};
      if (sub == "/events" && method == http::verb::post) return json_reply(s->submit(parse_body(body), idempotency_key));
      if (sub == "/frame" && method == http::verb::post) {
        auto frame = vision::decode_image(body);
        if (const auto t = query_param(target, "t")) frame.set_timestamp_ms(std::stoll(*t));
        return json_reply(s->submit_frame(std::move(frame)));
      }
    }
    if (method == http::verb::get) {
      if (auto r = static_file(path)) return *r;
    }
    throw Error(ErrorKind::NotFound, "no route for " + std::string(http::to_string(method)) + " " + path);
  }

  std::optional<HttpReply> static_file(const std::string& path) const {
    const auto& dir = mgr_.config().static_dir;
    if (!dir || path.find("..") != std::string::npos) return std::nullopt;
    auto file = *dir / (path == "/" ? std::string("index.html") : path.substr(1));
    if (!std::filesystem::is_regular_file(file)) return std::nullopt;
    return HttpReply{http::status::ok, vision::read_file_bytes(file), mime_type(file)};
  }

  SessionManager& mgr_;
};

namespace detail {

/// One upgraded stream. Pushes are queued on the strand and written one at
/// a time; reads only watch for the close.
class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, SessionManager& mgr) : ws_(std::move(socket)), mgr_(mgr) {}

  // No unsubscribe in the destructor: the last reference can be dropped
  // inside a push callback, which runs under the session lock. A dead
  // subscriber's weak_ptr just fails to lock.

  void run(http::request<http::string_body> req, std::string session_id) {
    try {
      session_ = mgr_.get(session_id);
    } catch (const Error&) {
      session_.reset();
    }
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

  void push(std::string msg) {
    net::post(ws_.get_executor(), [self = shared_from_this(), msg = std::move(msg)]() mutable {
      self->queue_.push_back(std::move(msg));
      if (self->queue_.size() == 1) self->write_next();
    });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    if (!session_) {
      push(error_body(ErrorKind::NotFound, "no such session").dump());
      closing_ = true;
      return;
    }
    token_ = mgr_.next_token();
    std::weak_ptr<WsSession> weak = shared_from_this();
    const auto snap = session_->subscribe_with_snapshot(token_, [weak](const nlohmann::json& m) {
      if (auto self = weak.lock()) self->push(m.dump());
    });
    push(snap.dump());
    read_loop();
  }

  void read_loop() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      if (session_) session_->unsubscribe(token_);
      return;
    }
    buffer_.consume(buffer_.size());  // client messages are ignored
    read_loop();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) return;
    queue_.pop_front();
    if (!queue_.empty()) {
      write_next();
    } else if (closing_) {
      ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  SessionManager& mgr_;
  std::shared_ptr<Session> session_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  int token_ = 0;
  bool closing_ = false;
};

/// Plain HTTP connection with keep-alive. Handlers run on the worker pool
/// because some of them block (inline dialogue turns, frame bursts).
class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Api& api, net::thread_pool& pool)
      : stream_(std::move(socket)), api_(api), pool_(pool) {}

  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::read, shared_from_this()));
  }

 private:
  void read() {
    parser_.emplace();
    parser_->body_limit(16 * 1024 * 1024);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, *parser_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    auto req = parser_->release();
    if (websocket::is_upgrade(req)) {
      if (const auto id = Api::stream_target(std::string(req.target()))) {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), api_.manager())->run(std::move(req), *id);
        return;
      }
    }
    req_ = std::move(req);
    net::post(pool_, [self = shared_from_this()] {
      HttpReply reply;
      if (self->req_.method() == http::verb::options) {
        reply = {http::status::no_content, "", "text/plain"};
      } else {
        std::optional<std::string> key;
        if (const auto it = self->req_.find("Idempotency-Key"); it != self->req_.end()) key = std::string(it->value());
        reply = self->api_.handle(self->req_.method(), std::string(self->req_.target()), self->req_.body(), key);
      }
      net::post(self->stream_.get_executor(), [self, reply = std::move(reply)]() mutable { self->write(std::move(reply)); });
    });
  }

  void write(HttpReply reply) {
    auto res = std::make_shared<http::response<http::string_body>>(reply.status, req_.version());
    res->set(http::field::server, "sar");
    res->set(http::field::content_type, reply.content_type);
    res->set(http::field::access_control_allow_origin, "*");
    res->set(http::field::access_control_allow_methods, "GET, POST, DELETE, OPTIONS");
    res->set(http::field::access_control_allow_headers, "Content-Type, Idempotency-Key");
    res->keep_alive(req_.keep_alive());
    res->body() = std::move(reply.body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!res->keep_alive()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  Api& api_;
  net::thread_pool& pool_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
  http::request<http::string_body> req_;
};

}  // namespace detail

/// HTTP + WebSocket front end. start() binds and returns; stop() joins.
class Server {
 public:
  explicit Server(SessionManager& mgr) : api_(mgr), ioc_(std::max(1, mgr.config().io_threads)), acceptor_(ioc_) {}

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds to the configured address; port 0 picks a free one.
  void start() {
    const auto& cfg = api_.manager().config();
    const tcp::endpoint ep(net::ip::make_address(cfg.bind), static_cast<unsigned short>(cfg.port));
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen(net::socket_base::max_listen_connections);
    port_ = acceptor_.local_endpoint().port();
    accept();
    for (int i = 0; i < std::max(1, cfg.io_threads); ++i) threads_.emplace_back([this] { ioc_.run(); });
  }

  void stop() {
    if (stopped_.exchange(true)) return;
    ioc_.stop();
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
    pool_.join();
  }

  /// Blocks until stop() is called from another thread or a signal handler.
  void wait() {
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
  }

  [[nodiscard]] unsigned short port() const noexcept { return port_; }
  [[nodiscard]] Api& api() noexcept { return api_; }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec) std::make_shared<detail::HttpSession>(std::move(socket), api_, pool_)->run();
      if (acceptor_.is_open()) accept();
    });
  }

  Api api_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  net::thread_pool pool_{4};
  std::vector<std::thread> threads_;
  unsigned short port_ = 0;
  std::atomic<bool> stopped_{false};
};

}  // namespace sar::session
