#pragma once

// Local HTTP gateway over a running device.

#include <httplib.h>

#include <string>
#include <thread>

#include "aquarium/runtime.hpp"

namespace aquarium {

namespace detail {

inline void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& error, const std::string& message) {
  send_json(res, status, Json{{"error", error}, {"message", message}});
}

}  // namespace detail

/// Serves GET /api/readings, GET /api/events, POST /api/feed, POST /api/pump
/// and GET /api/health. Handlers run on the server's worker threads and only
/// touch the runtime through its thread-safe surface.
class TelemetryService {
 public:
  explicit TelemetryService(Runtime& runtime) : runtime_(runtime) { routes(); }

  ~TelemetryService() { stop(); }

  TelemetryService(const TelemetryService&) = delete;
  TelemetryService& operator=(const TelemetryService&) = delete;

  /// Binds and starts serving in the background. Port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port) {
    bound_port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound_port_ < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound_port_;
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return bound_port_; }

 private:
  void routes() {
    using httplib::Request;
    using httplib::Response;

    server_.Get("/api/readings", [this](const Request&, Response& res) {
      const auto snap = runtime_.snapshot();
      if (!snap) return detail::send_error(res, 503, "service_starting", "no poll cycle has completed yet");
      detail::send_json(res, 200, Json(*snap));
    });

    server_.Get("/api/health", [this](const Request&, Response& res) {
      detail::send_json(res, 200, Json(runtime_.health()));
    });

    server_.Get("/api/events", [this](const Request& req, Response& res) {
      try {
        Timestamp since{};
        std::size_t limit = 100;
        std::optional<std::uint64_t> cursor;
        if (req.has_param("since")) since = parse_iso8601(req.get_param_value("since"));
        if (req.has_param("limit")) {
          const long long v = std::stoll(req.get_param_value("limit"));
          if (v < 1) throw std::invalid_argument("limit must be >= 1");
          limit = static_cast<std::size_t>(v);
        }
        if (req.has_param("cursor")) cursor = std::stoull(req.get_param_value("cursor"));
        const auto page = runtime_.log().page(since, limit, cursor);
        detail::send_json(res, 200,
                          Json{{"records", page.records},
                               {"next_cursor", page.next_cursor ? Json(*page.next_cursor) : Json(nullptr)}});
      } catch (const std::exception& e) {
        detail::send_error(res, 400, "bad_request", e.what());
      }
    });

    server_.Post("/api/feed", [this](const Request& req, Response& res) {
      command(res, [&] {
        const auto body = Json::parse(req.body);
        const int portions = body.value("portions", 1);
        const auto result = runtime_.feed_now(portions);
        return Json{{"accepted", result.outcome == FeedOutcome::Dispensed},
                    {"low_food", result.outcome == FeedOutcome::RejectedLowFood},
                    {"result", Json(EventPayload{result})}};
      });
    });

    server_.Post("/api/pump", [this](const Request& req, Response& res) {
      command(res, [&] {
        const auto body = Json::parse(req.body);
        return Json{{"pump", runtime_.set_pump(body.at("on").get<bool>())}};
      });
    });
  }

  template <typename F>
  void command(httplib::Response& res, F&& f) {
    try {
      detail::send_json(res, 200, f());
    } catch (const InvalidPortions& e) {
      detail::send_error(res, 400, "invalid_portions", e.what());
    } catch (const ControlUnavailable& e) {
      detail::send_error(res, 503, "control_unavailable", e.what());
    } catch (const Json::exception& e) {
      detail::send_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      detail::send_error(res, 500, "internal", e.what());
    }
  }

  Runtime& runtime_;
  httplib::Server server_;
  std::thread thread_;
  int bound_port_ = -1;
};

}  // namespace aquarium
