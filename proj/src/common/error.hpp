#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace n2sky {

// Error categories shared by every module. The gateway maps these onto HTTP
// status codes and the C API maps them onto n2sky_status values.
enum class Errc {
  invalid_argument,
  syntax_error,
  schema_violation,
  unsupported,
  dimension_mismatch,
  failed_precondition,
  not_found,
  already_exists,
  unauthenticated,
  permission_denied,
  unavailable,
  io_error,
  internal,
};

std::string_view errc_name(Errc code) noexcept;
int errc_http_status(Errc code) noexcept;
Errc errc_from_name(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Syntax errors carry the byte offset into the offending text.
class SyntaxError : public Error {
 public:
  // position: 0-based byte offset into the input.
  SyntaxError(std::size_t position, const std::string& message)
      : Error(Errc::syntax_error,
              message + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace n2sky
