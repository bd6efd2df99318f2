#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "delibq/annotator.hpp"
#include "delibq/benchmarking.hpp"
#include "delibq/corpus.hpp"
#include "delibq/nudge.hpp"
#include "delibq/reliability.hpp"

namespace delibq {

/// Version string baked in at build time.
std::string_view tool_version();

enum class ColumnType {
  kText,
  kCount,
  kReal,
};

std::string_view to_string(ColumnType t);

struct Column {
  std::string name;
  ColumnType type = ColumnType::kText;
};

using Cell = std::variant<std::string, std::int64_t, double>;

struct TableMetadata {
  std::optional<std::uint64_t> seed;
  /// Input name to content hash.
  std::map<std::string, std::string> inputs;
  /// Analysis parameters (window, resamples, ...), stringified.
  std::map<std::string, std::string> parameters;
  std::string tool_version{delibq::tool_version()};
  std::string template_version{kTemplateVersion};
};

/// Typed table with reproducibility metadata. Serialized as tab-separated
/// values plus a JSON sidecar. Reals use the shortest round-trip form.
class ReportTable {
 public:
  ReportTable(std::string name, std::vector<Column> columns, TableMetadata metadata = {});

  const std::string& name() const { return name_; }
  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }
  const TableMetadata& metadata() const { return metadata_; }
  TableMetadata& metadata() { return metadata_; }

  /// Throws InvariantError on arity or type mismatch.
  void add_row(std::vector<Cell> row);

  std::string to_tsv() const;
  std::string metadata_json() const;

  /// Writes <dir>/<name>.tsv and <dir>/<name>.meta.json.
  void write(const std::filesystem::path& dir) const;

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::vector<std::vector<Cell>> rows_;
  TableMetadata metadata_;
};

std::string format_real(double v);

struct RoomQualitySummary {
  std::string room_id;
  std::string event_id;
  std::size_t count = 0;
  std::map<CriterionId, double> means;
};

struct EventCentroid {
  std::string event_id;
  std::size_t rooms = 0;
  /// Unweighted mean of the room means.
  std::map<CriterionId, double> means;
};

struct RoomQuality {
  std::vector<RoomQualitySummary> rooms;
  std::vector<EventCentroid> centroids;
};

/// Mean quality per room over the filtered contributions, plus per-event
/// centroids. Rooms without filtered contributions are left out.
RoomQuality room_quality(const QualityScores& scores, const Corpus& corpus, const std::vector<Contribution>& filtered,
                         const std::vector<CriterionId>& criteria);

struct AgendaCell {
  std::string event_id;
  std::string session_id;
  int agenda_item = 0;
  /// Empty for the overall breakdown.
  std::string gender;
  std::size_t count = 0;
  std::map<CriterionId, double> means;
};

struct AgendaQuality {
  std::vector<AgendaCell> cells;
  /// Contributions left out of the gender breakdown for unknown gender.
  std::size_t excluded_unknown_gender = 0;
};

/// Mean quality per (event, session, agenda item).
AgendaQuality agenda_quality(const QualityScores& scores, const Corpus& corpus,
                             const std::vector<Contribution>& filtered, const std::vector<CriterionId>& criteria);

/// Same cells split by speaker gender; unknown gender is excluded and counted.
AgendaQuality agenda_quality_by_gender(const QualityScores& scores, const Corpus& corpus,
                                       const std::vector<Contribution>& filtered,
                                       const std::vector<CriterionId>& criteria);

// Table builders. Every analysis has exactly one pinned schema.

ReportTable corpus_stats_table(const CorpusStats& stats, TableMetadata meta);

struct IrrRow {
  CriterionId criterion = CriterionId::kQ1;
  std::size_t statements = 0;
  std::size_t raters = 0;
  IrrResult result;
};
ReportTable irr_table(const std::vector<IrrRow>& rows, TableMetadata meta);

struct CoverageRow {
  CriterionId criterion = CriterionId::kQ1;
  std::size_t requested = 0;
  std::size_t rated = 0;
  std::size_t failed = 0;
};
std::vector<CoverageRow> annotation_coverage(const AnnotationSet& annotations,
                                             const std::vector<Contribution>& contributions,
                                             const std::vector<CriterionId>& criteria, int trials);
ReportTable coverage_table(const std::vector<CoverageRow>& rows, TableMetadata meta);
ReportTable trial_variance_table(const std::vector<TrialVariance>& rows, TableMetadata meta);

struct GoldenRow {
  CriterionId criterion = CriterionId::kQ1;
  bool debiased = false;
  GoldenComparison comparison;
};
ReportTable golden_table(const std::vector<GoldenRow>& rows, TableMetadata meta);

struct MeanDiffRow {
  CriterionId criterion = CriterionId::kQ1;
  bool debiased = false;
  double model_mean = 0.0;
  double human_mean = 0.0;
  /// Paired model minus human.
  BootstrapCI diff;
};
ReportTable model_vs_human_table(const std::vector<MeanDiffRow>& rows, TableMetadata meta);
ReportTable pair_summary_table(const PairSummary& summary, TableMetadata meta);

struct RateRow {
  std::string target;
  ArmRates rates;
};
ReportTable nudge_rates_table(const std::vector<RateRow>& rows, TableMetadata meta);
ReportTable nudge_intervals_table(const std::vector<BinRate>& rows, TableMetadata meta);
ReportTable nudge_ordinals_table(const std::vector<OrdinalRate>& rows, TableMetadata meta);
ReportTable quality_comparison_table(std::string name, std::string_view first, std::string_view second,
                                     const std::vector<QualityComparison>& rows, TableMetadata meta);
ReportTable participant_effect_table(const std::vector<ParticipantEffect>& rows, TableMetadata meta);
ReportTable activity_correlation_table(const std::vector<ActivityCorrelation>& rows, TableMetadata meta);
ReportTable room_quality_table(const RoomQuality& rq, const std::vector<CriterionId>& criteria, TableMetadata meta);
ReportTable event_centroid_table(const RoomQuality& rq, const std::vector<CriterionId>& criteria, TableMetadata meta);
ReportTable agenda_quality_table(std::string name, const AgendaQuality& aq, const std::vector<CriterionId>& criteria,
                                 TableMetadata meta);

}  // namespace delibq
