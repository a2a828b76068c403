#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace n2sky::registry {

// Local user file of salted BLAKE2b password hashes:
//   {"users":[{"name":"alice","salt":"<hex>","hash":"<hex>"}]}
class UserStore {
 public:
  UserStore() = default;
  // Loads `path` if it exists; add_user() writes back to it.
  explicit UserStore(std::string path);

  UserStore(const UserStore& other);
  UserStore& operator=(const UserStore& other);

  void add_user(const std::string& name, const std::string& password);
  bool verify(const std::string& name, const std::string& password) const;
  bool contains(const std::string& name) const;
  std::size_t size() const;

 private:
  struct Credential {
    std::string salt;
    std::string hash;
  };
  void save() const;

  std::string path_;
  mutable std::mutex mutex_;
  std::map<std::string, Credential> users_;
};

std::string hash_password(const std::string& salt_hex, const std::string& password);

}  // namespace n2sky::registry
