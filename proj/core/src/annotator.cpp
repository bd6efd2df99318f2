#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "delibq/annotation_cache.hpp"
#include "delibq/annotator.hpp"
#include "delibq/stats.hpp"

namespace delibq {

void AnnotationSet::add(Rating rating) {
  if (rating.score < 1 || rating.score > 5) {
    throw InputError("rating for '" + rating.statement_id + "' has score " + std::to_string(rating.score) +
                     " outside 1..5");
  }
  if (rating.justification.empty()) throw InputError("rating for '" + rating.statement_id + "' has no justification");
  if (rating.statement_id.empty() || rating.rater.empty()) throw InputError("rating without statement or rater id");
  Key key{rating.statement_id, rating.criterion, rating.rater, rating.trial};
  auto [it, fresh] = ratings_.emplace(std::move(key), std::move(rating));
  if (!fresh) {
    throw InputError("duplicate rating for statement '" + it->second.statement_id + "', " +
                     std::string(to_string(it->second.criterion)) + ", rater '" + it->second.rater + "'");
  }
}

void AnnotationSet::add_failure(AnnotationFailure failure) { failures_.push_back(std::move(failure)); }

void AnnotationSet::merge(const AnnotationSet& other) {
  for (const auto& [key, rating] : other.ratings_) {
    auto it = ratings_.find(key);
    if (it == ratings_.end()) {
      ratings_.emplace(key, rating);
    } else if (it->second.score != rating.score || it->second.justification != rating.justification) {
      throw InputError("conflicting ratings for statement '" + rating.statement_id + "', rater '" + rating.rater + "'");
    }
  }
  failures_.insert(failures_.end(), other.failures_.begin(), other.failures_.end());
}

std::vector<std::string> AnnotationSet::raters() const {
  std::vector<std::string> out;
  for (const auto& [key, r] : ratings_) out.push_back(r.rater);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void AnnotationSet::validate_against(const Corpus& corpus) const {
  for (const auto& [key, r] : ratings_) {
    if (!corpus.find_contribution(r.statement_id)) {
      throw InputError("rating references statement '" + r.statement_id + "' that is not in the corpus");
    }
  }
}

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct Task {
  std::string statement_id;
  CriterionId criterion;
  int trial;
  ProviderRequest request;
  CacheKey key;
};

struct TaskResult {
  std::optional<Rating> rating;
  std::optional<AnnotationFailure> failure;
};

}  // namespace

AnnotateResult annotate(const Corpus& corpus, const std::vector<Contribution>& contributions,
                        const std::vector<CriterionId>& criteria, CompletionProvider& provider, AnnotationCache& cache,
                        const AnnotateOptions& options) {
  if (options.trials < 1) throw InputError("trials must be at least 1");
  if (options.retries < 0) throw InputError("retries must not be negative");

  PromptOptions prompt_options = options.prompt;
  prompt_options.model_id = options.model_id;

  AnnotateResult result;
  std::vector<Task> tasks;
  std::vector<TaskResult> results;

  for (const auto& contribution : contributions) {
    const auto context = context_for(contribution, corpus);
    for (auto crit : criteria) {
      auto request = build_prompt(context, crit, corpus, prompt_options);
      if (request.truncated_prior > 0) ++result.stats.truncated_prompts;
      const auto hash = prompt_hash(request);
      for (int trial = 0; trial < options.trials; ++trial) {
        CacheKey key{contribution.id, crit, hash, options.model_id, options.template_version, request.temperature, trial};
        tasks.push_back(Task{contribution.id, crit, trial, request, std::move(key)});
      }
    }
  }
  result.stats.requested = tasks.size();
  results.resize(tasks.size());

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (auto hit = cache.lookup(tasks[i].key)) {
      results[i].rating = Rating{tasks[i].statement_id, tasks[i].criterion, options.model_id, hit->score,
                                 hit->justification, tasks[i].trial};
      ++result.stats.cache_hits;
    } else {
      pending.push_back(i);
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls{0};
  std::atomic<std::size_t> prompt_chars{0};
  std::atomic<bool> abort{false};
  std::mutex error_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      const Task& task = tasks[pending[slot]];
      TaskResult& out = results[pending[slot]];
      try {
        const auto requested_at = now_ms();
        std::string last_text;
        std::string last_error;
        int attempts = 0;
        for (; attempts <= options.retries; ++attempts) {
          if (options.on_call) options.on_call(task.request);
          calls.fetch_add(1);
          prompt_chars.fetch_add(task.request.system_instructions.size() + task.request.user_prompt.size());
          const auto response = provider.complete(task.request);
          last_text = response.text;
          try {
            auto parsed = parse_rating(response.text);
            CacheEntry entry{task.key, CacheStatus::kOk, parsed.score, parsed.justification, response.text, {},
                             attempts + 1, requested_at, now_ms()};
            cache.append(entry);
            out.rating = Rating{task.statement_id, task.criterion, options.model_id, parsed.score,
                                std::move(parsed.justification), task.trial};
            break;
          } catch (const RatingParseError& e) {
            last_error = e.what();
          }
        }
        if (!out.rating) {
          CacheEntry entry{task.key, CacheStatus::kFailed, 0, {}, last_text, "parse exhausted: " + last_error,
                           attempts, requested_at, now_ms()};
          cache.append(entry);
          out.failure = AnnotationFailure{task.statement_id, task.criterion, options.model_id, task.trial,
                                          "parse exhausted: " + last_error, last_text};
        }
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        abort.store(true);
      }
    }
  };

  const int workers = std::max(1, std::min<int>(options.parallelism, static_cast<int>(pending.size())));
  if (!pending.empty()) {
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
  }
  result.stats.provider_calls = calls.load();
  result.stats.prompt_chars = prompt_chars.load();
  if (first_error) std::rethrow_exception(first_error);

  for (auto& r : results) {
    if (r.rating) result.annotations.add(std::move(*r.rating));
    if (r.failure) {
      result.annotations.add_failure(std::move(*r.failure));
      ++result.stats.failures;
    }
  }
  return result;
}

std::vector<TrialVariance> trial_variance(const AnnotationSet& annotations, const std::string& rater) {
  std::map<CriterionId, std::map<std::string, std::vector<double>>> grouped;
  for (const auto& [key, r] : annotations.ratings()) {
    if (r.rater == rater) grouped[r.criterion][r.statement_id].push_back(r.score);
  }
  std::vector<TrialVariance> out;
  for (const auto& [crit, by_statement] : grouped) {
    TrialVariance tv;
    tv.criterion = crit;
    double total = 0.0;
    for (const auto& [id, scores] : by_statement) {
      if (scores.size() < 2) continue;
      total += sample_variance(scores);
      ++tv.statements;
    }
    tv.mean_variance = tv.statements ? total / static_cast<double>(tv.statements) : 0.0;
    out.push_back(tv);
  }
  return out;
}

}  // namespace delibq
