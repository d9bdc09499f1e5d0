#pragma once

#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "error.hpp"
#include "json_io.hpp"
#include "session.hpp"

namespace focusdiag {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::DuplicateMeasurement:
    case ErrorCode::SessionTerminal: return 409;
    case ErrorCode::Syntax:
    case ErrorCode::Io: return 400;
    default: return 422;
  }
}

namespace detail {

inline void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

inline void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, http_status(code), ojson{{"error", error_code_name(code)}, {"message", message}}.dump());
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, ErrorCode::Syntax, e.what());
  } catch (const std::exception& e) {
    send_json(res, 500, ojson{{"error", "internal"}, {"message", e.what()}}.dump());
  }
}

}  // namespace detail

/// Registers the session routes on `server`.
inline void install_routes(httplib::Server& server, SessionStore& store) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/models", [&store](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      std::string id = store.add_model(req.body);
      detail::send_json(res, 201, ojson{{"model_id", id}}.dump());
    });
  });

  server.Get(R"(/models/([A-Za-z0-9_-]+))", [&store](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      auto m = store.model(req.matches[1]);
      detail::send_json(res, 200, serialize_model(*m));
    });
  });

  server.Post("/sessions", [&store](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] {
      auto body = parse_json(req.body, "session request");
      if (!body.contains("model_id")) throw Error(ErrorCode::Syntax, "missing model_id");
      auto view = store.create_session(body["model_id"].get<std::string>(), session_config_from_json(body));
      detail::send_json(res, 201, view.dump());
    });
  });

  server.Post(R"(/sessions/([A-Za-z0-9_-]+)/measurements)",
              [&store](const httplib::Request& req, httplib::Response& res) {
                detail::guarded(res, [&] {
                  auto body = parse_json(req.body, "measurement");
                  detail::send_json(res, 200, store.submit(req.matches[1], body).dump());
                });
              });

  server.Get(R"(/sessions/([A-Za-z0-9_-]+))", [&store](const httplib::Request& req, httplib::Response& res) {
    detail::guarded(res, [&] { detail::send_json(res, 200, store.get(req.matches[1]).dump()); });
  });
}

}  // namespace focusdiag
