#include "common/error.hpp"

#include <array>
#include <utility>

namespace n2sky {

namespace {

constexpr std::array<std::pair<Errc, std::string_view>, 13> kNames{{
    {Errc::invalid_argument, "invalid_argument"},
    {Errc::syntax_error, "syntax_error"},
    {Errc::schema_violation, "schema_violation"},
    {Errc::unsupported, "unsupported"},
    {Errc::dimension_mismatch, "dimension_mismatch"},
    {Errc::failed_precondition, "failed_precondition"},
    {Errc::not_found, "not_found"},
    {Errc::already_exists, "already_exists"},
    {Errc::unauthenticated, "unauthenticated"},
    {Errc::permission_denied, "permission_denied"},
    {Errc::unavailable, "unavailable"},
    {Errc::io_error, "io_error"},
    {Errc::internal, "internal"},
}};

}  // namespace

std::string_view errc_name(Errc code) noexcept {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "internal";
}

Errc errc_from_name(std::string_view name) noexcept {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return Errc::internal;
}

int errc_http_status(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::syntax_error:
    case Errc::schema_violation:
    case Errc::unsupported:
    case Errc::dimension_mismatch:
    case Errc::failed_precondition:
      return 400;
    case Errc::unauthenticated:
      return 401;
    case Errc::permission_denied:
      return 403;
    case Errc::not_found:
      return 404;
    case Errc::already_exists:
      return 409;
    case Errc::unavailable:
      return 503;
    case Errc::io_error:
    case Errc::internal:
      return 500;
  }
  return 500;
}

}  // namespace n2sky
