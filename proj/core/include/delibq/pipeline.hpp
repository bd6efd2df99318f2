#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "delibq/annotator.hpp"
#include "delibq/error.hpp"
#include "delibq/provider.hpp"
#include "delibq/report.hpp"

namespace delibq {

/// Error raised inside a pipeline stage. Keeps the exit code of the cause.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message, ExitCode code)
      : Error(stage + ": " + message), stage_(std::move(stage)), code_(code) {}

  const std::string& stage() const noexcept { return stage_; }
  ExitCode exit_code() const noexcept override { return code_; }

 private:
  std::string stage_;
  ExitCode code_;
};

// Analysis bundles shared by the individual subcommands and the pipeline.

/// One r*_wg row per criterion over every rater present.
ReportTable irr_report(const AnnotationSet& annotations, const std::vector<CriterionId>& criteria, TableMetadata meta);

struct BenchmarkOptions {
  std::vector<std::size_t> group_sizes{1, 2, 3};
  /// Also report leave-one-out mean-corrected model scores.
  bool debias = false;
  int resamples = kDefaultResamples;
  std::uint64_t seed = 0;
  /// Rater id of the model in its annotation set; empty selects the only one.
  std::string model_rater;
};

/// golden_comparison and model_vs_human tables for the statements of the
/// human annotation set.
std::vector<ReportTable> benchmark_report(const AnnotationSet& humans, const AnnotationSet& model,
                                          const std::vector<CriterionId>& criteria, const BenchmarkOptions& options,
                                          const TableMetadata& meta);

struct NudgeReportOptions {
  Millis window = kDefaultResponseWindow;
  Millis bin = kDefaultBin;
  int resamples = kDefaultResamples;
  std::uint64_t seed = 0;
  NudgedSplitOptions split;
};

/// Response-rate tables. Needs no annotations.
std::vector<ReportTable> nudge_rate_report(const Corpus& corpus, const std::vector<Contribution>& filtered,
                                           const NudgeReportOptions& options, const TableMetadata& meta);

/// Analyses 1-3 and the activity correlation.
std::vector<ReportTable> nudge_quality_report(const Corpus& corpus, const std::vector<Contribution>& filtered,
                                              const QualityScores& scores, const std::vector<CriterionId>& criteria,
                                              const NudgeReportOptions& options, const TableMetadata& meta);

/// Room, event and agenda-item aggregates.
std::vector<ReportTable> quality_report(const Corpus& corpus, const std::vector<Contribution>& filtered,
                                        const QualityScores& scores, const std::vector<CriterionId>& criteria,
                                        const TableMetadata& meta);

struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path out_dir;
  std::size_t min_chars = kDefaultMinChars;
  std::vector<CriterionId> criteria{CriterionId::kQ1, CriterionId::kQ2, CriterionId::kQ3, CriterionId::kQ4};

  /// Use these ratings instead of querying the provider.
  std::optional<std::filesystem::path> annotations;
  /// Annotation cache file; empty puts it under <out_dir>/cache.
  std::filesystem::path cache;
  ProviderConfig provider;
  AnnotateOptions annotate;

  std::optional<std::filesystem::path> human_annotations;
  std::optional<std::filesystem::path> pair_evaluations;
  BenchmarkOptions benchmark;

  NudgeReportOptions nudge;

  /// Override the resamples and seed of the benchmark and nudge options.
  int resamples = kDefaultResamples;
  std::uint64_t seed = 0;
};

struct PipelineResult {
  std::vector<std::string> tables;
  AnnotateStats annotate_stats;
  std::filesystem::path manifest;
};

/// ingest -> filter -> annotate -> analyses -> report directory. Writes
/// manifest.json listing every table with its hash and the input hashes.
/// Stage failures are rethrown as StageError after the manifest has marked
/// the tables written so far as stale.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace delibq
