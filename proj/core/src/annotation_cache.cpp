#include "delibq/annotation_cache.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "delibq/error.hpp"

namespace delibq {

using json = nlohmann::json;

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

json to_json(const CacheEntry& e) {
  return json{
      {"statement_id", e.key.statement_id},
      {"criterion", std::string(to_string(e.key.criterion))},
      {"rater", e.key.model_id},
      {"prompt_hash", e.key.prompt_hash},
      {"model_id", e.key.model_id},
      {"template_version", e.key.template_version},
      {"temperature", e.key.temperature},
      {"trial", e.key.trial},
      {"status", e.status == CacheStatus::kOk ? "ok" : "failed"},
      {"score", e.score},
      {"justification", e.justification},
      {"raw_response", e.raw_response},
      {"error", e.error},
      {"attempts", e.attempts},
      {"requested_at_ms", e.requested_at_ms},
      {"completed_at_ms", e.completed_at_ms},
  };
}

CacheEntry from_json(const json& j) {
  CacheEntry e;
  e.key.statement_id = j.at("statement_id").get<std::string>();
  e.key.criterion = parse_criterion(j.at("criterion").get<std::string>());
  e.key.prompt_hash = j.at("prompt_hash").get<std::string>();
  e.key.model_id = j.at("model_id").get<std::string>();
  e.key.template_version = j.at("template_version").get<std::string>();
  e.key.temperature = j.value("temperature", 0.0);
  e.key.trial = j.value("trial", 0);
  e.status = j.value("status", std::string("ok")) == "ok" ? CacheStatus::kOk : CacheStatus::kFailed;
  e.score = j.value("score", 0);
  e.justification = j.value("justification", std::string());
  e.raw_response = j.value("raw_response", std::string());
  e.error = j.value("error", std::string());
  e.attempts = j.value("attempts", 0);
  e.requested_at_ms = j.value("requested_at_ms", std::int64_t{0});
  e.completed_at_ms = j.value("completed_at_ms", std::int64_t{0});
  return e;
}

}  // namespace

std::string CacheKey::canonical() const {
  std::string out;
  for (const std::string& part : {statement_id, std::string(to_string(criterion)), prompt_hash, model_id,
                                  template_version, shortest(temperature), std::to_string(trial)}) {
    out.append(part);
    out.push_back('\x1f');
  }
  return out;
}

AnnotationCache::AnnotationCache(std::filesystem::path path) : path_(std::move(path)) { load(); }

void AnnotationCache::load() {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw InputError("cannot read cache '" + path_.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    CacheEntry e;
    try {
      e = from_json(json::parse(line));
    } catch (const std::exception& ex) {
      // A torn final line from an interrupted run is skipped; anything else is corrupt.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw InputError("cache '" + path_.string() + "' line " + std::to_string(line_no) + ": " + ex.what());
    }
    auto canonical = e.key.canonical();
    auto it = entries_.find(canonical);
    // A later success replaces anything; a later failure never hides a success.
    if (it == entries_.end() || e.status == CacheStatus::kOk || it->second.status == CacheStatus::kFailed) {
      entries_[canonical] = std::move(e);
    }
  }
}

std::optional<CacheEntry> AnnotationCache::lookup(const CacheKey& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key.canonical());
  if (it == entries_.end() || it->second.status != CacheStatus::kOk) return std::nullopt;
  return it->second;
}

void AnnotationCache::append(const CacheEntry& entry) {
  std::lock_guard lock(mu_);
  if (!path_.empty()) {
    const std::string line = to_json(entry).dump() + "\n";
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw InputError("cannot open cache '" + path_.string() + "': " + std::strerror(errno));
    std::size_t written = 0;
    while (written < line.size()) {
      const auto n = ::write(fd, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        const int err = errno;
        ::close(fd);
        throw InputError("cannot write cache '" + path_.string() + "': " + std::strerror(err));
      }
      written += static_cast<std::size_t>(n);
    }
    ::close(fd);
  }
  auto canonical = entry.key.canonical();
  auto it = entries_.find(canonical);
  if (it == entries_.end() || entry.status == CacheStatus::kOk || it->second.status == CacheStatus::kFailed) {
    entries_[canonical] = entry;
  }
}

std::vector<CacheEntry> AnnotationCache::entries() const {
  std::lock_guard lock(mu_);
  std::vector<CacheEntry> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(v);
  return out;
}

std::size_t AnnotationCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

}  // namespace delibq
