#include "registry/users.hpp"

#include <sodium.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "common/error.hpp"
#include "common/ids.hpp"

namespace n2sky::registry {

using nlohmann::json;

std::string hash_password(const std::string& salt_hex, const std::string& password) {
  unsigned char out[crypto_generichash_BYTES];
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, sizeof out);
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(salt_hex.data()),
                            salt_hex.size());
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(password.data()),
                            password.size());
  crypto_generichash_final(&st, out, sizeof out);
  char hex[crypto_generichash_BYTES * 2 + 1];
  sodium_bin2hex(hex, sizeof hex, out, sizeof out);
  return hex;
}

UserStore::UserStore(std::string path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  try {
    const auto j = json::parse(in);
    for (const auto& u : j.at("users")) {
      users_[u.at("name").get<std::string>()] = {u.at("salt").get<std::string>(),
                                                 u.at("hash").get<std::string>()};
    }
  } catch (const json::exception& e) {
    throw Error(Errc::io_error, "malformed user file '" + path_ + "': " + e.what());
  }
}

UserStore::UserStore(const UserStore& other) {
  std::lock_guard lock(other.mutex_);
  path_ = other.path_;
  users_ = other.users_;
}

UserStore& UserStore::operator=(const UserStore& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  path_ = other.path_;
  users_ = other.users_;
  return *this;
}

void UserStore::add_user(const std::string& name, const std::string& password) {
  if (name.empty()) throw Error(Errc::invalid_argument, "user name must be non-empty");
  std::lock_guard lock(mutex_);
  const auto salt = random_hex(16);
  users_[name] = {salt, hash_password(salt, password)};
  save();
}

bool UserStore::verify(const std::string& name, const std::string& password) const {
  std::lock_guard lock(mutex_);
  auto it = users_.find(name);
  // Hash even for unknown users so timing does not reveal membership.
  const auto& salt = it == users_.end() ? std::string(32, '0') : it->second.salt;
  const auto computed = hash_password(salt, password);
  if (it == users_.end()) return false;
  return computed.size() == it->second.hash.size() &&
         sodium_memcmp(computed.data(), it->second.hash.data(), computed.size()) == 0;
}

bool UserStore::contains(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return users_.count(name) > 0;
}

std::size_t UserStore::size() const {
  std::lock_guard lock(mutex_);
  return users_.size();
}

void UserStore::save() const {
  if (path_.empty()) return;
  json j;
  j["users"] = json::array();
  for (const auto& [name, c] : users_) {
    j["users"].push_back({{"name", name}, {"salt", c.salt}, {"hash", c.hash}});
  }
  const auto parent = std::filesystem::path(path_).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path_, std::ios::trunc);
  out << j.dump(2) << "\n";
  if (!out) throw Error(Errc::io_error, "cannot write user file '" + path_ + "'");
}

}  // namespace n2sky::registry
