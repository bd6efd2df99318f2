#include "delibq/nudge.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

#include "delibq/error.hpp"
#include "delibq/stats.hpp"

namespace delibq {

std::vector<NudgeOutcome> link_nudges(const std::vector<NudgeEvent>& nudges, const std::vector<SpeakRequest>& requests,
                                      Millis window) {
  if (window < Millis(0)) throw InputError("response window must not be negative");

  std::vector<NudgeEvent> ordered;
  ordered.reserve(nudges.size());
  for (const auto& n : nudges) {
    if (n.kind != NudgeKind::kSpeakRoom) ordered.push_back(n);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const NudgeEvent& a, const NudgeEvent& b) { return std::tie(a.time, a.id) < std::tie(b.time, b.id); });

  struct Slot {
    Millis time;
    const SpeakRequest* request;
    bool used = false;
  };
  std::map<std::pair<std::string, std::string>, std::vector<Slot>> by_person;
  for (const auto& r : requests) by_person[{r.participant_id, r.room_id}].push_back(Slot{r.time, &r});
  for (auto& [key, slots] : by_person) {
    std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.time < b.time; });
  }

  std::vector<NudgeOutcome> out;
  out.reserve(ordered.size());
  for (const auto& n : ordered) {
    NudgeOutcome o;
    o.nudge = n;
    auto it = by_person.find({n.participant_id, n.room_id});
    if (it != by_person.end()) {
      auto& slots = it->second;
      auto first = std::upper_bound(slots.begin(), slots.end(), n.time,
                                    [](Millis t, const Slot& s) { return t < s.time; });
      for (auto s = first; s != slots.end() && s->time - n.time <= window; ++s) {
        if (s->used) continue;
        s->used = true;
        o.responded = true;
        o.response_delay = s->time - n.time;
        o.contribution_id = s->request->resulted_in_contribution;
        break;
      }
    }
    out.push_back(std::move(o));
  }
  return out;
}

RateEstimate rate_estimate(std::uint64_t numerator, std::uint64_t denominator) {
  if (denominator == 0) throw AnalysisError("rate with an empty denominator");
  const auto ci = wilson_interval(numerator, denominator);
  return RateEstimate{numerator, denominator, static_cast<double>(numerator) / static_cast<double>(denominator), ci.lo,
                      ci.hi};
}

ArmRates arm_rates(std::uint64_t sent_hits, std::uint64_t sent_total, std::uint64_t skipped_hits,
                   std::uint64_t skipped_total) {
  if (sent_total == 0 || skipped_total == 0) throw AnalysisError("arm_rates needs both arms non-empty");
  ArmRates out;
  out.sent = rate_estimate(sent_hits, sent_total);
  out.skipped = rate_estimate(skipped_hits, skipped_total);
  if (out.skipped.rate == 0.0) throw AnalysisError("relative uplift undefined: control arm rate is zero");
  out.relative_uplift = (out.sent.rate - out.skipped.rate) / out.skipped.rate;
  return out;
}

namespace {

bool counts_as_hit(const NudgeOutcome& o, ResponseTarget target, const std::set<std::string>* eligible) {
  if (!o.responded) return false;
  if (target == ResponseTarget::kRequest) return true;
  if (!o.contribution_id) return false;
  return eligible == nullptr || eligible->count(*o.contribution_id) > 0;
}

}  // namespace

ArmRates arm_rates(const std::vector<NudgeOutcome>& outcomes, ResponseTarget target,
                   const std::set<std::string>* eligible) {
  std::uint64_t hits[2] = {0, 0}, totals[2] = {0, 0};
  for (const auto& o : outcomes) {
    const int arm = o.nudge.arm == NudgeArm::kSent ? 0 : 1;
    ++totals[arm];
    if (counts_as_hit(o, target, eligible)) ++hits[arm];
  }
  return arm_rates(hits[0], totals[0], hits[1], totals[1]);
}

std::vector<BinRate> interval_breakdown(const std::vector<NudgeOutcome>& outcomes, Millis bin, Millis window) {
  if (bin <= Millis(0) || window <= Millis(0)) throw InputError("bin and window must be positive");
  if (window.count() % bin.count() != 0) throw InputError("bin width does not divide the response window");
  const auto n_bins = static_cast<std::size_t>(window / bin);

  std::uint64_t totals[2] = {0, 0};
  std::vector<std::uint64_t> counts[2] = {std::vector<std::uint64_t>(n_bins, 0), std::vector<std::uint64_t>(n_bins, 0)};
  for (const auto& o : outcomes) {
    const int arm = o.nudge.arm == NudgeArm::kSent ? 0 : 1;
    ++totals[arm];
    if (!o.responded || !o.response_delay) continue;
    const auto delay = *o.response_delay;
    if (delay <= Millis(0) || delay > window) continue;
    // Bin k holds ((k-1)*bin, k*bin].
    const auto k = static_cast<std::size_t>((delay.count() - 1) / bin.count());
    ++counts[arm][k];
  }

  std::vector<BinRate> out;
  for (int arm = 0; arm < 2; ++arm) {
    if (totals[arm] == 0) continue;
    for (std::size_t k = 0; k < n_bins; ++k) {
      BinRate b;
      b.arm = arm == 0 ? NudgeArm::kSent : NudgeArm::kSkipped;
      b.bin = static_cast<int>(k + 1);
      b.from = bin * static_cast<long>(k);
      b.to = bin * static_cast<long>(k + 1);
      b.estimate = rate_estimate(counts[arm][k], totals[arm]);
      out.push_back(b);
    }
  }
  return out;
}

std::vector<OrdinalRate> repeated_nudge_effect(const std::vector<NudgeOutcome>& outcomes) {
  std::uint64_t hits[kOrdinalBuckets] = {}, totals[kOrdinalBuckets] = {};
  for (const auto& o : outcomes) {
    if (o.nudge.arm != NudgeArm::kSent) continue;
    if (o.nudge.ordinal < 1) throw InputError("nudge '" + o.nudge.id + "' has no ordinal");
    const int bucket = std::min(o.nudge.ordinal, kOrdinalBuckets) - 1;
    ++totals[bucket];
    if (o.responded) ++hits[bucket];
  }
  std::vector<OrdinalRate> out;
  for (int b = 0; b < kOrdinalBuckets; ++b) {
    if (totals[b] == 0) continue;
    out.push_back(OrdinalRate{b + 1, rate_estimate(hits[b], totals[b])});
  }
  return out;
}

QualityScores::QualityScores(const AnnotationSet& annotations, const std::string& rater) : rater_(rater) {
  if (rater_.empty()) {
    const auto raters = annotations.raters();
    if (raters.size() != 1) {
      throw InputError("annotations contain " + std::to_string(raters.size()) +
                       " raters; choose one for quality scores");
    }
    rater_ = raters.front();
  }
  std::map<std::pair<std::string, CriterionId>, std::pair<double, int>> acc;
  for (const auto& [key, r] : annotations.ratings()) {
    if (r.rater != rater_) continue;
    auto& [sum, n] = acc[{r.statement_id, r.criterion}];
    sum += r.score;
    ++n;
  }
  for (const auto& [k, v] : acc) scores_[k] = v.first / v.second;
}

void QualityScores::set(const std::string& statement_id, CriterionId criterion, double score) {
  scores_[{statement_id, criterion}] = score;
}

std::optional<double> QualityScores::get(const std::string& statement_id, CriterionId criterion) const {
  auto it = scores_.find({statement_id, criterion});
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

std::set<CriterionId> QualityScores::criteria() const {
  std::set<CriterionId> out;
  for (const auto& [k, v] : scores_) out.insert(k.second);
  return out;
}

namespace {

/// Collects scores for a list of statements and reports every gap at once.
class ScoreGatherer {
 public:
  ScoreGatherer(const QualityScores& scores, CriterionId criterion) : scores_(scores), criterion_(criterion) {}

  std::vector<double> gather(const std::vector<std::string>& ids) {
    std::vector<double> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
      if (auto s = scores_.get(id, criterion_)) {
        out.push_back(*s);
      } else {
        missing_.push_back(id);
      }
    }
    return out;
  }

  double single(const std::string& id) {
    if (auto s = scores_.get(id, criterion_)) return *s;
    missing_.push_back(id);
    return 0.0;
  }

  void check() const {
    if (missing_.empty()) return;
    std::ostringstream os;
    os << missing_.size() << " contribution(s) lack a " << to_string(criterion_) << " rating:";
    for (std::size_t i = 0; i < missing_.size() && i < 10; ++i) os << ' ' << missing_[i];
    if (missing_.size() > 10) os << " ...";
    throw AnalysisError(os.str());
  }

 private:
  const QualityScores& scores_;
  CriterionId criterion_;
  std::vector<std::string> missing_;
};

QualityComparison compare_groups(const QualityScores& scores, CriterionId criterion,
                                 const std::vector<std::string>& first, const std::vector<std::string>& second,
                                 BootstrapOptions opts, const char* what) {
  ScoreGatherer g(scores, criterion);
  auto a = g.gather(first);
  auto b = g.gather(second);
  g.check();
  if (a.empty() || b.empty()) throw AnalysisError(std::string(what) + ": one of the groups is empty");
  QualityComparison c;
  c.criterion = criterion;
  c.n_first = a.size();
  c.n_second = b.size();
  c.first_mean = mean(a);
  c.second_mean = mean(b);
  c.diff = bootstrap_mean_diff(a, b, Pairing::kUnpaired, opts.resamples, opts.seed);
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  c.stddev = sample_stddev(all);
  return c;
}

}  // namespace

std::vector<QualityComparison> quality_by_arm(const QualityScores& scores, const std::vector<NudgeOutcome>& outcomes,
                                              const std::vector<Contribution>& filtered,
                                              const std::vector<CriterionId>& criteria, BootstrapOptions opts) {
  std::set<std::string> eligible;
  for (const auto& c : filtered) eligible.insert(c.id);
  std::vector<std::string> sent, skipped;
  for (const auto& o : outcomes) {
    if (!o.responded || !o.contribution_id || !eligible.count(*o.contribution_id)) continue;
    (o.nudge.arm == NudgeArm::kSent ? sent : skipped).push_back(*o.contribution_id);
  }
  std::vector<QualityComparison> out;
  for (auto crit : criteria) out.push_back(compare_groups(scores, crit, sent, skipped, opts, "quality_by_arm"));
  return out;
}

std::set<std::string> nudged_contributions(const std::vector<NudgeOutcome>& outcomes) {
  std::set<std::string> out;
  for (const auto& o : outcomes) {
    if (o.nudge.arm == NudgeArm::kSent && o.responded && o.contribution_id) out.insert(*o.contribution_id);
  }
  return out;
}

namespace {

std::set<std::string> skipped_responses(const std::vector<NudgeOutcome>& outcomes) {
  std::set<std::string> out;
  for (const auto& o : outcomes) {
    if (o.nudge.arm == NudgeArm::kSkipped && o.responded && o.contribution_id) out.insert(*o.contribution_id);
  }
  return out;
}

}  // namespace

std::vector<QualityComparison> quality_nudged_vs_rest(const QualityScores& scores,
                                                      const std::vector<NudgeOutcome>& outcomes,
                                                      const std::vector<Contribution>& filtered,
                                                      const std::vector<CriterionId>& criteria, BootstrapOptions opts,
                                                      NudgedSplitOptions split) {
  const auto nudged_ids = nudged_contributions(outcomes);
  const auto skipped_ids = split.exclude_skipped_responses ? skipped_responses(outcomes) : std::set<std::string>{};
  std::vector<std::string> nudged, other;
  for (const auto& c : filtered) {
    if (nudged_ids.count(c.id)) {
      nudged.push_back(c.id);
    } else if (!skipped_ids.count(c.id)) {
      other.push_back(c.id);
    }
  }
  std::vector<QualityComparison> out;
  for (auto crit : criteria) out.push_back(compare_groups(scores, crit, nudged, other, opts, "quality_nudged_vs_rest"));
  return out;
}

std::vector<ParticipantEffect> per_participant_effect(const QualityScores& scores,
                                                      const std::vector<NudgeOutcome>& outcomes,
                                                      const std::vector<Contribution>& filtered,
                                                      const std::vector<CriterionId>& criteria,
                                                      BootstrapOptions opts) {
  const auto nudged_ids = nudged_contributions(outcomes);
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> by_participant;
  for (const auto& c : filtered) {
    auto& [nudged, other] = by_participant[c.participant_id];
    (nudged_ids.count(c.id) ? nudged : other).push_back(c.id);
  }

  std::vector<ParticipantEffect> out;
  for (auto crit : criteria) {
    ParticipantEffect effect;
    effect.criterion = crit;
    ScoreGatherer g(scores, crit);
    std::vector<double> diffs;
    for (const auto& [pid, split] : by_participant) {
      const auto& [nudged, other] = split;
      if (nudged.empty() || other.empty()) continue;
      const auto a = g.gather(nudged);
      const auto b = g.gather(other);
      if (a.size() != nudged.size() || b.size() != other.size()) continue;
      const double d = mean(a) - mean(b);
      effect.per_participant.emplace_back(pid, d);
      diffs.push_back(d);
    }
    g.check();
    if (diffs.empty()) throw AnalysisError("no participant has both nudged and other contributions");
    effect.n_participants = diffs.size();
    effect.effect = bootstrap_mean(diffs, opts.resamples, opts.seed);
    out.push_back(std::move(effect));
  }
  return out;
}

std::vector<ActivityCorrelation> activity_quality_correlation(const QualityScores& scores,
                                                              const std::vector<Contribution>& filtered,
                                                              const std::vector<CriterionId>& criteria) {
  std::map<std::string, std::vector<std::string>> by_participant;
  for (const auto& c : filtered) by_participant[c.participant_id].push_back(c.id);

  std::vector<ActivityCorrelation> out;
  for (auto crit : criteria) {
    ScoreGatherer g(scores, crit);
    std::vector<double> counts, quality;
    for (const auto& [pid, ids] : by_participant) {
      const auto xs = g.gather(ids);
      if (xs.size() != ids.size()) continue;
      counts.push_back(static_cast<double>(ids.size()));
      quality.push_back(mean(xs));
    }
    g.check();
    if (counts.size() < 2) throw AnalysisError("correlation needs at least two participants");
    out.push_back(ActivityCorrelation{crit, counts.size(), pearson(counts, quality)});
  }
  return out;
}

}  // namespace delibq
