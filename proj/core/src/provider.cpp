#include "delibq/provider.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "delibq/hash.hpp"

namespace delibq {

using json = nlohmann::json;

std::string_view to_string(ProviderErrorKind kind) {
  switch (kind) {
    case ProviderErrorKind::kTransport: return "transport";
    case ProviderErrorKind::kAuth: return "auth";
    case ProviderErrorKind::kRateLimit: return "rate-limit";
    case ProviderErrorKind::kContent: return "content";
  }
  return "transport";
}

namespace {

constexpr std::string_view kMockJustifications[] = {
    "The statement offers little beyond restating the proposal.",
    "It gives a personal example that grounds the argument.",
    "It adds a perspective not raised earlier in the discussion.",
    "It responds directly to points made by earlier speakers.",
    "It raises a question the group can usefully explore next.",
    "The point is relevant but stays general and unsupported.",
    "It connects the proposal to a concrete consequence.",
};

std::uint64_t hex_prefix(const std::string& hex) { return std::stoull(hex.substr(0, 15), nullptr, 16); }

}  // namespace

ProviderResponse MockProvider::complete(const ProviderRequest& request) {
  const auto digest = sha256_hex(std::to_string(seed_) + "\x1f" + request.model_id + "\x1f" + prompt_hash(request));
  const std::uint64_t h = hex_prefix(digest);
  const int score = static_cast<int>(h % 5) + 1;
  const auto& why = kMockJustifications[(h / 5) % std::size(kMockJustifications)];
  return ProviderResponse{"Rating: " + std::to_string(score) + "/5. Justification: " + std::string(why),
                          std::chrono::milliseconds(0)};
}

TableProvider TableProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read response table '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw InputError("response table '" + path.string() + "': " + e.what());
  }
  if (!doc.is_object()) throw InputError("response table must be a JSON object of prompt hash to text");
  std::map<std::string, std::string> table;
  for (const auto& [k, v] : doc.items()) {
    if (!v.is_string()) throw InputError("response table entry '" + k + "' is not a string");
    table.emplace(k, v.get<std::string>());
  }
  return TableProvider(std::move(table));
}

ProviderResponse TableProvider::complete(const ProviderRequest& request) {
  auto it = table_.find(prompt_hash(request));
  if (it == table_.end()) {
    throw ProviderError(ProviderErrorKind::kContent, "no canned response for prompt " + prompt_hash(request));
  }
  return ProviderResponse{it->second, std::chrono::milliseconds(0)};
}

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

  HttpResponse post(const std::string& url, const std::map<std::string, std::string>& headers,
                    const std::string& body) override {
    // Split "scheme://host[:port]/path".
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ProviderError(ProviderErrorKind::kTransport, "bad URL '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) {
      throw ProviderError(ProviderErrorKind::kTransport, "HTTP request to " + origin + " failed: " +
                                                             httplib::to_string(res.error()));
    }
    return HttpResponse{res->status, res->body};
  }

 private:
  std::chrono::seconds timeout_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(timeout);
}

ChatCompletionProvider::ChatCompletionProvider(ChatProviderConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  const char* key = std::getenv(config_.credential_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ProviderError(ProviderErrorKind::kAuth,
                        "missing credential: environment variable " + config_.credential_env + " is not set");
  }
  api_key_ = key;
  if (!transport_) throw InvariantError("chat provider needs a transport");
}

ProviderResponse ChatCompletionProvider::complete(const ProviderRequest& request) {
  json body = {
      {"model", request.model_id},
      {"temperature", request.temperature},
      {"messages",
       json::array({{{"role", "system"}, {"content", request.system_instructions}},
                    {{"role", "user"}, {"content", request.user_prompt}}})},
  };
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";

  const auto started = std::chrono::steady_clock::now();
  const auto res = transport_->post(url, {{"Authorization", "Bearer " + api_key_}}, body.dump());
  const auto latency =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

  if (res.status == 401 || res.status == 403) {
    throw ProviderError(ProviderErrorKind::kAuth, "provider rejected credentials (HTTP " + std::to_string(res.status) + ")");
  }
  if (res.status == 429) throw ProviderError(ProviderErrorKind::kRateLimit, "rate limited (HTTP 429)");
  if (res.status >= 500) {
    throw ProviderError(ProviderErrorKind::kTransport, "provider error (HTTP " + std::to_string(res.status) + ")");
  }
  if (res.status != 200) {
    throw ProviderError(ProviderErrorKind::kContent,
                        "provider refused request (HTTP " + std::to_string(res.status) + "): " + res.body.substr(0, 200));
  }
  try {
    const auto doc = json::parse(res.body);
    return ProviderResponse{doc.at("choices").at(0).at("message").at("content").get<std::string>(), latency};
  } catch (const json::exception& e) {
    throw ProviderError(ProviderErrorKind::kContent, std::string("unexpected provider response: ") + e.what());
  }
}

std::chrono::milliseconds RetryPolicy::backoff(int retry) const {
  const double raw = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, retry);
  const double capped = std::min(raw, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

RetryingProvider::RetryingProvider(std::shared_ptr<CompletionProvider> inner, RetryPolicy policy, Sleeper sleeper)
    : inner_(std::move(inner)), policy_(policy), sleep_(std::move(sleeper)) {
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (policy_.max_attempts < 1) policy_.max_attempts = 1;
}

ProviderResponse RetryingProvider::complete(const ProviderRequest& request) {
  for (int attempt = 0;; ++attempt) {
    try {
      return inner_->complete(request);
    } catch (const ProviderError& e) {
      if (!e.retryable() || attempt + 1 >= policy_.max_attempts) throw;
      sleep_(policy_.backoff(attempt));
    }
  }
}

std::shared_ptr<CompletionProvider> make_provider(const ProviderConfig& config) {
  if (config.name == "mock") return std::make_shared<MockProvider>(config.mock_seed);
  if (config.name == "table") return std::make_shared<TableProvider>(TableProvider::from_file(config.table_path));
  if (config.name == "openai") {
    auto live = std::make_shared<ChatCompletionProvider>(config.chat, std::shared_ptr<HttpTransport>(make_http_transport()));
    return std::make_shared<RetryingProvider>(std::move(live), config.retry);
  }
  throw InputError("unknown provider '" + config.name + "' (expected mock, table or openai)");
}

}  // namespace delibq
