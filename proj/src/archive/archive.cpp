#include "archive/archive.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "common/error.hpp"

namespace n2sky::archive {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::network_object: return "network_object";
    case Kind::training_result: return "training_result";
    case Kind::evaluation_result: return "evaluation_result";
    case Kind::pattern_set: return "pattern_set";
  }
  return "network_object";
}

Kind parse_kind(std::string_view name) {
  for (Kind k : {Kind::network_object, Kind::training_result, Kind::evaluation_result,
                 Kind::pattern_set}) {
    if (kind_name(k) == name) return k;
  }
  throw Error(Errc::invalid_argument, "unknown archive kind '" + std::string(name) + "'");
}

bool valid_id(std::string_view id) {
  if (id.empty() || id.size() > 200 || id.front() == '.') return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    if (!ok) return false;
  }
  return true;
}

std::string ArchiveKey::str() const {
  return std::string(kind_name(kind)) + "/" + id;
}

ArchiveKey ArchiveKey::parse(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    throw Error(Errc::invalid_argument,
                "archive key '" + std::string(text) + "' is not of the form kind/id");
  }
  ArchiveKey key{parse_kind(text.substr(0, slash)), std::string(text.substr(slash + 1))};
  if (!valid_id(key.id)) {
    throw Error(Errc::invalid_argument, "invalid archive id '" + key.id + "'");
  }
  return key;
}

namespace {

// Write to a temporary file, fsync, then rename over the target.
void durable_write(const fs::path& target, const std::string& bytes) {
  const fs::path tmp = target.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw Error(Errc::io_error, "cannot create '" + tmp.string() + "': " + std::strerror(errno));
  }
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error(Errc::io_error, "write to '" + tmp.string() + "' failed: " + std::strerror(err));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    throw Error(Errc::io_error, "fsync of '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error(Errc::io_error, "rename to '" + target.string() + "' failed: " + ec.message());
  const int dir = ::open(target.parent_path().c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dir >= 0) {
    ::fsync(dir);
    ::close(dir);
  }
}

ordered_json listing_json(const Listing& l) {
  ordered_json j;
  j["kind"] = kind_name(l.key.kind);
  j["id"] = l.key.id;
  j["owner"] = l.metadata.owner;
  j["created_at"] = l.metadata.created_at_ms;
  if (l.metadata.paradigm_id) j["paradigm_id"] = *l.metadata.paradigm_id;
  if (l.metadata.parent) j["parent"] = l.metadata.parent->str();
  return j;
}

Listing listing_from(const json& j) {
  Listing l;
  l.key.kind = parse_kind(j.at("kind").get<std::string>());
  l.key.id = j.at("id").get<std::string>();
  l.metadata.owner = j.value("owner", std::string{});
  l.metadata.created_at_ms = j.value("created_at", std::int64_t{0});
  if (j.contains("paradigm_id")) l.metadata.paradigm_id = j.at("paradigm_id").get<std::string>();
  if (j.contains("parent")) l.metadata.parent = ArchiveKey::parse(j.at("parent").get<std::string>());
  return l;
}

}  // namespace

FileStorage::FileStorage(std::string root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  for (Kind k : {Kind::network_object, Kind::training_result, Kind::evaluation_result,
                 Kind::pattern_set}) {
    fs::create_directories(fs::path(root_) / kind_name(k), ec);
  }
  if (ec) throw Error(Errc::io_error, "cannot create archive root '" + root_ + "': " + ec.message());
}

std::string FileStorage::payload_path(const ArchiveKey& key) const {
  return (fs::path(root_) / kind_name(key.kind) / (key.id + ".json")).string();
}

std::vector<Listing> FileStorage::load_index() {
  const auto path = fs::path(root_) / "index.json";
  std::vector<Listing> out;
  if (!fs::exists(path)) return out;
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
    for (const auto& e : j.at("entries")) out.push_back(listing_from(e));
  } catch (const json::exception& e) {
    throw Error(Errc::io_error, "corrupt archive index '" + path.string() + "': " + e.what());
  }
  return out;
}

void FileStorage::write_payload(const ArchiveKey& key, const std::string& payload) {
  durable_write(payload_path(key), payload);
}

std::string FileStorage::read_payload(const ArchiveKey& key) {
  std::ifstream in(payload_path(key), std::ios::binary);
  if (!in) throw Error(Errc::io_error, "payload for '" + key.str() + "' is missing on disk");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void FileStorage::write_index(const std::vector<Listing>& listings) {
  ordered_json j;
  j["version"] = 1;
  ordered_json entries = ordered_json::array();
  for (const auto& l : listings) entries.push_back(listing_json(l));
  j["entries"] = std::move(entries);
  durable_write(fs::path(root_) / "index.json", j.dump(1) + "\n");
}

void FaultInjectingStorage::check() const {
  if (outage_) throw Error(Errc::unavailable, "archive storage unavailable (injected outage)");
}

std::vector<Listing> FaultInjectingStorage::load_index() {
  check();
  return inner_->load_index();
}

void FaultInjectingStorage::write_payload(const ArchiveKey& key, const std::string& payload) {
  check();
  inner_->write_payload(key, payload);
}

std::string FaultInjectingStorage::read_payload(const ArchiveKey& key) {
  check();
  return inner_->read_payload(key);
}

void FaultInjectingStorage::write_index(const std::vector<Listing>& listings) {
  check();
  inner_->write_index(listings);
}

Archive::Archive(std::unique_ptr<Storage> storage, Clock clock)
    : storage_(std::move(storage)), clock_(std::move(clock)) {
  listings_ = storage_->load_index();
  for (std::size_t i = 0; i < listings_.size(); ++i) index_[listings_[i].key] = i;
}

std::unique_ptr<Archive> Archive::open(const std::string& root) {
  return std::make_unique<Archive>(std::make_unique<FileStorage>(root));
}

ArchiveEntry Archive::put(ArchiveEntry entry) {
  if (!valid_id(entry.key.id)) {
    throw Error(Errc::invalid_argument, "invalid archive id '" + entry.key.id + "'");
  }
  if (entry.metadata.created_at_ms == 0) entry.metadata.created_at_ms = to_unix_ms(clock_());
  {
    std::unique_lock lock(mutex_);
    if (index_.count(entry.key) || pending_.count(entry.key)) {
      throw Error(Errc::already_exists, "archive key '" + entry.key.str() + "' already exists");
    }
    if (entry.metadata.parent && !index_.count(*entry.metadata.parent)) {
      throw Error(Errc::failed_precondition,
                  "parent '" + entry.metadata.parent->str() + "' of '" + entry.key.str() +
                      "' is not in the archive");
    }
    pending_.insert(entry.key);
  }
  auto release = [&] {
    std::unique_lock lock(mutex_);
    pending_.erase(entry.key);
  };
  try {
    storage_->write_payload(entry.key, entry.payload);
    std::lock_guard writer(index_write_mutex_);
    std::vector<Listing> next;
    {
      std::shared_lock lock(mutex_);
      next = listings_;
    }
    next.push_back({entry.key, entry.metadata});
    storage_->write_index(next);
    std::unique_lock lock(mutex_);
    index_[entry.key] = listings_.size();
    listings_.push_back({entry.key, entry.metadata});
    pending_.erase(entry.key);
  } catch (...) {
    release();
    throw;
  }
  return entry;
}

ArchiveEntry Archive::get(const ArchiveKey& key) const {
  EntryMetadata meta;
  {
    std::shared_lock lock(mutex_);
    auto it = index_.find(key);
    if (it == index_.end()) {
      throw Error(Errc::not_found, "no archive entry '" + key.str() + "'");
    }
    meta = listings_[it->second].metadata;
  }
  return {key, storage_->read_payload(key), std::move(meta)};
}

bool Archive::contains(const ArchiveKey& key) const {
  std::shared_lock lock(mutex_);
  return index_.count(key) > 0;
}

std::vector<Listing> Archive::list(Kind kind, const ListFilter& filter) const {
  std::shared_lock lock(mutex_);
  std::vector<Listing> out;
  for (const auto& l : listings_) {
    if (l.key.kind != kind) continue;
    if (filter.owner && l.metadata.owner != *filter.owner) continue;
    if (filter.paradigm_id && l.metadata.paradigm_id != filter.paradigm_id) continue;
    out.push_back(l);
  }
  return out;
}

std::size_t Archive::size() const {
  std::shared_lock lock(mutex_);
  return listings_.size();
}

}  // namespace n2sky::archive
