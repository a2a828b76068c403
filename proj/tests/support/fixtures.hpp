#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "datastream/store.hpp"
#include "engine/network.hpp"
#include "paradigm/paradigm.hpp"
#include "support/oracles.hpp"

namespace n2sky::testing {

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

// Three layer, fully connected backprop paradigm with variable io dims.
paradigm::ParadigmDescriptor backprop_descriptor(std::string id = "backprop");
std::string backprop_descriptor_text();
// Two-layer delta-rule paradigm.
paradigm::ParadigmDescriptor delta_descriptor(std::string id = "delta");

engine::PatternSet xor_patterns();
inline constexpr std::uint64_t kXorSeed = 1;
// Recorded reference run: seed kXorSeed, [2,2,1], sigmoid, lr 0.5,
// momentum 0.9, target 0.01.
inline constexpr std::int64_t kXorGoldenEpochs = 323;

datastream::TableStore to_store(const oracle::Table& t);
datastream::DocumentStore to_store(const oracle::Collection& c);
bool same_rows(const std::vector<datastream::Row>& got,
               const std::vector<std::vector<oracle::Cell>>& want);
bool same_docs(const std::vector<datastream::Document>& got, const std::vector<oracle::Doc>& want);

// Bitwise equality of doubles, so -0.0 vs 0.0 and NaN payloads count.
bool bit_equal(const std::vector<double>& a, const std::vector<double>& b);
bool bit_equal(const std::vector<engine::Matrix>& a, const std::vector<engine::Matrix>& b);

}  // namespace n2sky::testing
