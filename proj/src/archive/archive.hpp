#pragma once

// Write-once keyed persistence for network objects, training/evaluation
// results and pattern sets.
//
// On-disk layout (FileStorage):
//   <root>/<kind>/<id>.json   payload, byte-exact
//   <root>/index.json         keys and metadata of every entry
//
// A key becomes visible only after its payload and the index are durable.

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "common/clock.hpp"

namespace n2sky::archive {

enum class Kind { network_object, training_result, evaluation_result, pattern_set };

std::string_view kind_name(Kind k);
Kind parse_kind(std::string_view name);

struct ArchiveKey {
  Kind kind = Kind::network_object;
  std::string id;

  // "kind/id"
  std::string str() const;
  static ArchiveKey parse(std::string_view text);
  auto operator<=>(const ArchiveKey&) const = default;
};

struct EntryMetadata {
  std::string owner;
  std::int64_t created_at_ms = 0;
  std::optional<std::string> paradigm_id;
  std::optional<ArchiveKey> parent;
  bool operator==(const EntryMetadata&) const = default;
};

struct ArchiveEntry {
  ArchiveKey key;
  std::string payload;
  EntryMetadata metadata;
  bool operator==(const ArchiveEntry&) const = default;
};

struct Listing {
  ArchiveKey key;
  EntryMetadata metadata;
  bool operator==(const Listing&) const = default;
};

struct ListFilter {
  std::optional<std::string> owner;
  std::optional<std::string> paradigm_id;
};

// Byte storage behind the archive. Implementations throw Error(io_error) or
// Error(unavailable) on failure.
class Storage {
 public:
  virtual ~Storage() = default;
  virtual std::vector<Listing> load_index() = 0;
  virtual void write_payload(const ArchiveKey& key, const std::string& payload) = 0;
  virtual std::string read_payload(const ArchiveKey& key) = 0;
  virtual void write_index(const std::vector<Listing>& listings) = 0;
};

class FileStorage final : public Storage {
 public:
  explicit FileStorage(std::string root);
  std::vector<Listing> load_index() override;
  void write_payload(const ArchiveKey& key, const std::string& payload) override;
  std::string read_payload(const ArchiveKey& key) override;
  void write_index(const std::vector<Listing>& listings) override;

  const std::string& root() const { return root_; }

 private:
  std::string payload_path(const ArchiveKey& key) const;
  std::string root_;
};

// Wraps another storage and fails every call while an outage is switched on.
class FaultInjectingStorage final : public Storage {
 public:
  explicit FaultInjectingStorage(std::unique_ptr<Storage> inner)
      : inner_(std::move(inner)) {}

  void set_outage(bool down) { outage_ = down; }
  bool outage() const { return outage_; }

  std::vector<Listing> load_index() override;
  void write_payload(const ArchiveKey& key, const std::string& payload) override;
  std::string read_payload(const ArchiveKey& key) override;
  void write_index(const std::vector<Listing>& listings) override;

 private:
  void check() const;
  std::unique_ptr<Storage> inner_;
  std::atomic<bool> outage_{false};
};

class Archive {
 public:
  explicit Archive(std::unique_ptr<Storage> storage, Clock clock = system_clock());

  // FileStorage rooted at `root`.
  static std::unique_ptr<Archive> open(const std::string& root);

  // Errors: already_exists (duplicate key), failed_precondition (parent
  // missing), io_error/unavailable (storage). `created_at_ms` of 0 is
  // stamped with the current time.
  ArchiveEntry put(ArchiveEntry entry);

  // Error: not_found.
  ArchiveEntry get(const ArchiveKey& key) const;

  bool contains(const ArchiveKey& key) const;

  std::vector<Listing> list(Kind kind, const ListFilter& filter = {}) const;

  std::size_t size() const;

 private:
  std::unique_ptr<Storage> storage_;
  Clock clock_;

  mutable std::shared_mutex mutex_;  // guards listings_/index_/pending_
  std::vector<Listing> listings_;    // insertion order
  std::map<ArchiveKey, std::size_t> index_;
  std::set<ArchiveKey> pending_;

  std::mutex index_write_mutex_;  // serializes index file rewrites
};

// Identifiers double as file names.
bool valid_id(std::string_view id);

}  // namespace n2sky::archive
