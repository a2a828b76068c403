#include "services/http.hpp"

namespace n2sky::services {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json error_body(Errc code, const std::string& message) {
  ordered_json e;
  e["code"] = errc_name(code);
  e["status"] = errc_http_status(code);
  e["message"] = message;
  return {{"error", e}};
}

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, errc_http_status(e.code()), error_body(e.code(), e.what()));
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw SyntaxError(e.byte > 0 ? e.byte - 1 : 0, "request body is not valid JSON");
  }
}

std::optional<HttpReply> http_call(const std::string& endpoint, const std::string& method,
                                   const std::string& path, const std::string& body,
                                   const httplib::Headers& headers,
                                   std::chrono::milliseconds timeout) {
  httplib::Client client(endpoint);
  client.set_connection_timeout(std::chrono::seconds(2));
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Result r;
  if (method == "GET") {
    r = client.Get(path, headers);
  } else if (method == "POST") {
    r = client.Post(path, headers, body, "application/json");
  } else if (method == "PUT") {
    r = client.Put(path, headers, body, "application/json");
  } else if (method == "DELETE") {
    r = client.Delete(path, headers);
  } else {
    throw Error(Errc::invalid_argument, "unsupported HTTP method '" + method + "'");
  }
  if (!r) return std::nullopt;
  return HttpReply{r->status, r->body};
}

}  // namespace n2sky::services
