#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "delibq/error.hpp"

namespace delibq {

struct ProviderRequest {
  std::string system_instructions;
  std::string user_prompt;
  std::string model_id;
  /// Decoding temperature sent to the provider; part of the cache key.
  double temperature = 0.0;
  /// Number of oldest prior statements dropped to fit the prompt budget.
  std::size_t truncated_prior = 0;
};

/// Stable hex digest of the request text (system and user prompt).
std::string prompt_hash(const ProviderRequest& request);

struct ProviderResponse {
  std::string text;
  std::chrono::milliseconds latency{0};
};

enum class ProviderErrorKind {
  kTransport,
  kAuth,
  kRateLimit,
  /// Provider rejected the content; retrying will not help.
  kContent,
};

std::string_view to_string(ProviderErrorKind kind);

class ProviderError : public Error {
 public:
  ProviderError(ProviderErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  ProviderErrorKind kind() const noexcept { return kind_; }
  bool retryable() const noexcept {
    return kind_ == ProviderErrorKind::kRateLimit || kind_ == ProviderErrorKind::kTransport;
  }
  ExitCode exit_code() const noexcept override { return ExitCode::kProviderError; }

 private:
  ProviderErrorKind kind_;
};

/// A text-completion backend. Implementations keep no per-call state and
/// must tolerate concurrent calls.
class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual ProviderResponse complete(const ProviderRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Deterministic offline provider: the answer is a pure function of the seed
/// and the request text, always in the "Rating: x/5. Justification: ..." form.
class MockProvider final : public CompletionProvider {
 public:
  explicit MockProvider(std::uint64_t seed = 0) : seed_(seed) {}
  ProviderResponse complete(const ProviderRequest& request) override;
  std::string name() const override { return "mock"; }

 private:
  std::uint64_t seed_;
};

/// Replays canned answers keyed by prompt hash.
class TableProvider final : public CompletionProvider {
 public:
  explicit TableProvider(std::map<std::string, std::string> table) : table_(std::move(table)) {}
  /// Loads a JSON object mapping prompt hash to response text.
  static TableProvider from_file(const std::filesystem::path& path);

  ProviderResponse complete(const ProviderRequest& request) override;
  std::string name() const override { return "table"; }

 private:
  std::map<std::string, std::string> table_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Minimal HTTP seam so the live provider can be exercised without a network.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// Throws ProviderError(kTransport) when no response was received.
  virtual HttpResponse post(const std::string& url, const std::map<std::string, std::string>& headers,
                            const std::string& body) = 0;
};

/// cpp-httplib backed transport.
std::unique_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout = std::chrono::seconds(60));

struct ChatProviderConfig {
  std::string base_url = "https://api.openai.com/v1";
  /// Environment variable holding the API key.
  std::string credential_env = "DELIBQ_API_KEY";
};

/// OpenAI-compatible chat-completions client. Reads the credential when
/// constructed and fails with kAuth before any request if it is missing.
class ChatCompletionProvider final : public CompletionProvider {
 public:
  ChatCompletionProvider(ChatProviderConfig config, std::shared_ptr<HttpTransport> transport);
  ProviderResponse complete(const ProviderRequest& request) override;
  std::string name() const override { return "openai"; }

 private:
  ChatProviderConfig config_;
  std::string api_key_;
  std::shared_ptr<HttpTransport> transport_;
};

struct RetryPolicy {
  /// Total attempts including the first call.
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30'000};

  /// Delay before retry number `retry` (0-based).
  std::chrono::milliseconds backoff(int retry) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Retries rate-limit and transport failures with exponential backoff.
class RetryingProvider final : public CompletionProvider {
 public:
  RetryingProvider(std::shared_ptr<CompletionProvider> inner, RetryPolicy policy, Sleeper sleeper = {});
  ProviderResponse complete(const ProviderRequest& request) override;
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<CompletionProvider> inner_;
  RetryPolicy policy_;
  Sleeper sleep_;
};

struct ProviderConfig {
  /// "mock", "table" or "openai".
  std::string name = "mock";
  std::uint64_t mock_seed = 0;
  std::filesystem::path table_path;
  ChatProviderConfig chat;
  RetryPolicy retry;
};

std::shared_ptr<CompletionProvider> make_provider(const ProviderConfig& config);

}  // namespace delibq
