#pragma once

#include <string>
#include <string_view>

namespace n2sky {

// Random hex token of `bytes` bytes from the OS CSPRNG.
std::string random_hex(std::size_t bytes);

// Opaque identifier such as "net-3f9a...".
std::string make_id(std::string_view prefix);

}  // namespace n2sky
