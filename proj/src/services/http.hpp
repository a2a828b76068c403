#pragma once

// Small helpers shared by the gateway, the workers and the client.

#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "common/error.hpp"

namespace n2sky::services {

inline constexpr const char* kSessionHeader = "X-Session-Id";

nlohmann::ordered_json error_body(Errc code, const std::string& message);

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body);
void send_error(httplib::Response& res, const Error& e);

// Parses a request body as JSON; Error(syntax_error) on failure.
nlohmann::json parse_body(const httplib::Request& req);

struct HttpReply {
  int status = 0;
  std::string body;
};

// One request against "http://host:port". std::nullopt on connection
// failure.
std::optional<HttpReply> http_call(const std::string& endpoint, const std::string& method,
                                   const std::string& path, const std::string& body = {},
                                   const httplib::Headers& headers = {},
                                   std::chrono::milliseconds timeout = std::chrono::seconds(10));

}  // namespace n2sky::services
