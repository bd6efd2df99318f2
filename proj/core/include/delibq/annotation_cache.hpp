#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "delibq/annotator.hpp"

namespace delibq {

/// Everything that determines a model answer. Changing any field forces a
/// new provider call.
struct CacheKey {
  std::string statement_id;
  CriterionId criterion = CriterionId::kQ1;
  std::string prompt_hash;
  std::string model_id;
  std::string template_version;
  double temperature = 0.0;
  int trial = 0;

  std::string canonical() const;
};

enum class CacheStatus { kOk, kFailed };

struct CacheEntry {
  CacheKey key;
  CacheStatus status = CacheStatus::kOk;
  int score = 0;
  std::string justification;
  std::string raw_response;
  /// Failure reason when status is kFailed.
  std::string error;
  int attempts = 0;
  std::int64_t requested_at_ms = 0;
  std::int64_t completed_at_ms = 0;
};

/// Line-delimited answer cache. Appends are serialized in-process and written
/// with a single O_APPEND write per record, so concurrent writers never
/// interleave partial lines. An empty path keeps the cache in memory.
class AnnotationCache {
 public:
  AnnotationCache() = default;
  explicit AnnotationCache(std::filesystem::path path);

  /// Successful entry for the key, if any. Failed entries are not hits.
  std::optional<CacheEntry> lookup(const CacheKey& key) const;
  void append(const CacheEntry& entry);

  std::vector<CacheEntry> entries() const;
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  void load();

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, CacheEntry> entries_;
};

}  // namespace delibq
