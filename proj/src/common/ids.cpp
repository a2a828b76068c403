#include "common/ids.hpp"

#include <sodium.h>

#include <stdexcept>
#include <vector>

namespace n2sky {

namespace {

void ensure_sodium() {
  static const bool ready = sodium_init() >= 0;
  if (!ready) throw std::runtime_error("libsodium initialisation failed");
}

}  // namespace

std::string random_hex(std::size_t bytes) {
  ensure_sodium();
  std::vector<unsigned char> buf(bytes);
  randombytes_buf(buf.data(), buf.size());
  std::string hex(bytes * 2 + 1, '\0');
  sodium_bin2hex(hex.data(), hex.size(), buf.data(), buf.size());
  hex.pop_back();
  return hex;
}

std::string make_id(std::string_view prefix) {
  std::string id(prefix);
  id += '-';
  id += random_hex(8);
  return id;
}

}  // namespace n2sky
