#include "delibq/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>

#include <json.hpp>

#include "delibq/annotation_cache.hpp"
#include "delibq/annotation_io.hpp"
#include "delibq/hash.hpp"
#include "delibq/stats.hpp"

namespace delibq {

using json = nlohmann::json;

ReportTable irr_report(const AnnotationSet& annotations, const std::vector<CriterionId>& criteria, TableMetadata meta) {
  std::vector<IrrRow> rows;
  for (auto crit : criteria) {
    const auto matrix = rating_matrix(annotations, crit);
    matrix.require_complete();
    rows.push_back(IrrRow{crit, matrix.num_statements(), matrix.num_raters(), rwg_star(matrix)});
  }
  return irr_table(rows, std::move(meta));
}

std::vector<ReportTable> benchmark_report(const AnnotationSet& humans, const AnnotationSet& model,
                                          const std::vector<CriterionId>& criteria, const BenchmarkOptions& options,
                                          const TableMetadata& meta) {
  std::string model_rater = options.model_rater;
  if (model_rater.empty()) {
    const auto raters = model.raters();
    if (raters.size() != 1) throw InputError("model annotations must contain exactly one rater");
    model_rater = raters.front();
  }
  TableMetadata m = meta;
  m.seed = options.seed;
  m.parameters["resamples"] = std::to_string(options.resamples);
  m.parameters["model_rater"] = model_rater;

  std::vector<GoldenRow> golden;
  std::vector<MeanDiffRow> diffs;
  for (auto crit : criteria) {
    const auto matrix = rating_matrix(humans, crit);
    matrix.require_complete();
    const auto raw = rater_scores(model, crit, model_rater, matrix.statements());
    const auto human_means = statement_means(matrix);

    std::vector<std::pair<bool, std::vector<double>>> variants{{false, raw}};
    if (options.debias) variants.emplace_back(true, debias_model_scores(raw, human_means));
    for (const auto& [debiased, scores] : variants) {
      for (auto g : options.group_sizes) {
        golden.push_back(GoldenRow{crit, debiased, compare_model_vs_groups(matrix, scores, g)});
      }
      MeanDiffRow row;
      row.criterion = crit;
      row.debiased = debiased;
      row.model_mean = mean(scores);
      row.human_mean = mean(human_means);
      row.diff = bootstrap_mean_diff(scores, human_means, Pairing::kPaired, options.resamples, options.seed);
      diffs.push_back(row);
    }
  }
  std::vector<ReportTable> out;
  out.push_back(golden_table(golden, m));
  out.push_back(model_vs_human_table(diffs, m));
  return out;
}

std::vector<ReportTable> nudge_rate_report(const Corpus& corpus, const std::vector<Contribution>& filtered,
                                           const NudgeReportOptions& options, const TableMetadata& meta) {
  TableMetadata m = meta;
  m.parameters["window_ms"] = std::to_string(options.window.count());
  m.parameters["bin_ms"] = std::to_string(options.bin.count());

  const auto outcomes = link_nudges(corpus.nudges(), corpus.speak_requests(), options.window);
  std::set<std::string> eligible;
  for (const auto& c : filtered) eligible.insert(c.id);

  std::vector<RateRow> rates;
  rates.push_back(RateRow{"request", arm_rates(outcomes, ResponseTarget::kRequest)});
  rates.push_back(RateRow{"statement", arm_rates(outcomes, ResponseTarget::kContribution)});
  rates.push_back(RateRow{"statement_filtered", arm_rates(outcomes, ResponseTarget::kContribution, &eligible)});

  std::vector<ReportTable> out;
  out.push_back(nudge_rates_table(rates, m));
  out.push_back(nudge_intervals_table(interval_breakdown(outcomes, options.bin, options.window), m));
  out.push_back(nudge_ordinals_table(repeated_nudge_effect(outcomes), m));
  return out;
}

std::vector<ReportTable> nudge_quality_report(const Corpus& corpus, const std::vector<Contribution>& filtered,
                                              const QualityScores& scores, const std::vector<CriterionId>& criteria,
                                              const NudgeReportOptions& options, const TableMetadata& meta) {
  TableMetadata m = meta;
  m.seed = options.seed;
  m.parameters["window_ms"] = std::to_string(options.window.count());
  m.parameters["resamples"] = std::to_string(options.resamples);
  m.parameters["exclude_skipped_responses"] = options.split.exclude_skipped_responses ? "true" : "false";

  const auto outcomes = link_nudges(corpus.nudges(), corpus.speak_requests(), options.window);
  const BootstrapOptions boot{options.resamples, options.seed};

  std::vector<ReportTable> out;
  out.push_back(quality_comparison_table("quality_by_arm", "sent", "skipped",
                                         quality_by_arm(scores, outcomes, filtered, criteria, boot), m));
  out.push_back(quality_comparison_table(
      "quality_nudged_vs_rest", "nudged", "other",
      quality_nudged_vs_rest(scores, outcomes, filtered, criteria, boot, options.split), m));
  out.push_back(participant_effect_table(per_participant_effect(scores, outcomes, filtered, criteria, boot), m));
  out.push_back(activity_correlation_table(activity_quality_correlation(scores, filtered, criteria), m));
  return out;
}

std::vector<ReportTable> quality_report(const Corpus& corpus, const std::vector<Contribution>& filtered,
                                        const QualityScores& scores, const std::vector<CriterionId>& criteria,
                                        const TableMetadata& meta) {
  const auto rq = room_quality(scores, corpus, filtered, criteria);
  std::vector<ReportTable> out;
  out.push_back(room_quality_table(rq, criteria, meta));
  out.push_back(event_centroid_table(rq, criteria, meta));
  out.push_back(agenda_quality_table("agenda_quality", agenda_quality(scores, corpus, filtered, criteria), criteria,
                                     meta));
  out.push_back(agenda_quality_table("agenda_quality_gender",
                                     agenda_quality_by_gender(scores, corpus, filtered, criteria), criteria, meta));
  return out;
}

namespace {

struct WrittenTable {
  std::string name;
  std::string tsv_sha256;
  std::string meta_sha256;
};

class ManifestWriter {
 public:
  explicit ManifestWriter(std::filesystem::path out_dir) : out_dir_(std::move(out_dir)) {}

  void input(const std::string& name, const std::string& hash) { inputs_[name] = hash; }
  void parameter(const std::string& name, const std::string& value) { parameters_[name] = value; }
  void artifact(const std::string& file, const std::string& hash) { artifacts_[file] = hash; }

  void write_table(const ReportTable& t) {
    t.write(out_dir_);
    tables_.push_back(WrittenTable{t.name(), sha256_hex(t.to_tsv()), sha256_hex(t.metadata_json())});
  }

  const std::vector<WrittenTable>& tables() const { return tables_; }

  std::filesystem::path finish(std::uint64_t seed, const StageError* failure) const {
    json tables = json::array();
    for (const auto& t : tables_) {
      tables.push_back({{"name", t.name},
                        {"file", t.name + ".tsv"},
                        {"sha256", t.tsv_sha256},
                        {"metadata_file", t.name + ".meta.json"},
                        {"metadata_sha256", t.meta_sha256},
                        {"stale", failure != nullptr}});
    }
    json j = {
        {"tool_version", std::string(tool_version())},
        {"template_version", std::string(kTemplateVersion)},
        {"seed", seed},
        {"status", failure ? "failed" : "complete"},
        {"inputs", inputs_},
        {"parameters", parameters_},
        {"artifacts", artifacts_},
        {"tables", tables},
    };
    if (failure) {
      j["failed_stage"] = failure->stage();
      j["error"] = failure->what();
    }
    const auto path = out_dir_ / "manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
    return path;
  }

 private:
  std::filesystem::path out_dir_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> parameters_;
  std::map<std::string, std::string> artifacts_;
  std::vector<WrittenTable> tables_;
};

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.what(), e.exit_code());
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), ExitCode::kInvariantViolation);
  }
}

std::filesystem::path default_cache(const PipelineConfig& config) {
  if (!config.cache.empty()) return config.cache;
  if (const char* dir = std::getenv("DELIBQ_CACHE_DIR"); dir && *dir) {
    return std::filesystem::path(dir) / "annotations.cache.jsonl";
  }
  return config.out_dir / "cache" / "annotations.cache.jsonl";
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config) {
  if (config.out_dir.empty()) throw InputError("no report directory given");
  std::filesystem::create_directories(config.out_dir);

  ManifestWriter manifest(config.out_dir);
  PipelineResult result;

  BenchmarkOptions bench = config.benchmark;
  bench.resamples = config.resamples;
  bench.seed = config.seed;
  NudgeReportOptions nudge = config.nudge;
  nudge.resamples = config.resamples;
  nudge.seed = config.seed;

  manifest.parameter("min_chars", std::to_string(config.min_chars));
  manifest.parameter("resamples", std::to_string(config.resamples));
  manifest.parameter("window_ms", std::to_string(nudge.window.count()));
  manifest.parameter("bin_ms", std::to_string(nudge.bin.count()));
  std::string criteria_list;
  for (auto c : config.criteria) criteria_list += (criteria_list.empty() ? "" : ",") + std::string(to_string(c));
  manifest.parameter("criteria", criteria_list);

  try {
    const Corpus corpus = stage("ingest", [&] {
      manifest.input("corpus", sha256_file(config.corpus));
      return ingest_corpus(config.corpus);
    });
    const auto filtered = stage("filter", [&] { return filter_contributions(corpus, config.min_chars); });

    TableMetadata meta;
    meta.inputs["corpus"] = sha256_file(config.corpus);
    meta.parameters["min_chars"] = std::to_string(config.min_chars);
    stage("report", [&] { manifest.write_table(corpus_stats_table(corpus_stats(corpus, config.min_chars), meta)); });

    const AnnotationSet annotations = stage("annotate", [&] {
      if (config.annotations) {
        auto set = read_annotations(*config.annotations);
        set.validate_against(corpus);
        return set;
      }
      manifest.parameter("provider", config.provider.name);
      manifest.parameter("model_id", config.annotate.model_id);
      manifest.parameter("trials", std::to_string(config.annotate.trials));
      auto provider = make_provider(config.provider);
      AnnotationCache cache(default_cache(config));
      auto res = annotate(corpus, filtered, config.criteria, *provider, cache, config.annotate);
      result.annotate_stats = res.stats;
      return std::move(res.annotations);
    });
    const auto digest = annotation_digest(annotations);
    manifest.input("annotations", digest);
    meta.inputs["annotations"] = digest;

    stage("annotate", [&] {
      write_annotations(config.out_dir / "annotations.jsonl", annotations);
      manifest.artifact("annotations.jsonl", digest);
      manifest.write_table(coverage_table(
          annotation_coverage(annotations, filtered, config.criteria, config.annotate.trials), meta));
      if (config.annotate.trials > 1 && !config.annotations) {
        manifest.write_table(trial_variance_table(trial_variance(annotations, config.annotate.model_id), meta));
      }
    });

    if (config.human_annotations) {
      const auto humans = stage("irr", [&] {
        manifest.input("human_annotations", sha256_file(*config.human_annotations));
        return read_annotations(*config.human_annotations);
      });
      TableMetadata hmeta = meta;
      hmeta.inputs["human_annotations"] = sha256_file(*config.human_annotations);
      stage("irr", [&] { manifest.write_table(irr_report(humans, config.criteria, hmeta)); });
      stage("benchmark", [&] {
        for (const auto& t : benchmark_report(humans, annotations, config.criteria, bench, hmeta)) {
          manifest.write_table(t);
        }
      });
    }
    if (config.pair_evaluations) {
      stage("benchmark", [&] {
        manifest.input("pair_evaluations", sha256_file(*config.pair_evaluations));
        TableMetadata pmeta;
        pmeta.inputs["pair_evaluations"] = sha256_file(*config.pair_evaluations);
        pmeta.seed = config.seed;
        pmeta.parameters["resamples"] = std::to_string(config.resamples);
        const auto evals = read_pair_evaluations(*config.pair_evaluations);
        manifest.write_table(pair_summary_table(summarize_pair_evaluations(evals, config.resamples, config.seed), pmeta));
      });
    }

    const auto scores = stage("nudge", [&] { return QualityScores(annotations); });
    stage("nudge", [&] {
      for (const auto& t : nudge_rate_report(corpus, filtered, nudge, meta)) manifest.write_table(t);
      for (const auto& t : nudge_quality_report(corpus, filtered, scores, config.criteria, nudge, meta)) {
        manifest.write_table(t);
      }
    });
    stage("report", [&] {
      for (const auto& t : quality_report(corpus, filtered, scores, config.criteria, meta)) manifest.write_table(t);
    });
  } catch (const StageError& e) {
    manifest.finish(config.seed, &e);
    throw;
  }

  result.manifest = manifest.finish(config.seed, nullptr);
  for (const auto& t : manifest.tables()) result.tables.push_back(t.name);
  return result;
}

}  // namespace delibq
