#include "delibq/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "delibq/error.hpp"
#include "delibq/hash.hpp"
#include "delibq/stats.hpp"

#ifndef DELIBQ_VERSION
#define DELIBQ_VERSION "0.0.0"
#endif

namespace delibq {

using json = nlohmann::json;

std::string_view tool_version() { return DELIBQ_VERSION; }

std::string_view to_string(ColumnType t) {
  switch (t) {
    case ColumnType::kText: return "text";
    case ColumnType::kCount: return "count";
    case ColumnType::kReal: return "real";
  }
  return "text";
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

ReportTable::ReportTable(std::string name, std::vector<Column> columns, TableMetadata metadata)
    : name_(std::move(name)), columns_(std::move(columns)), metadata_(std::move(metadata)) {}

void ReportTable::add_row(std::vector<Cell> row) {
  if (row.size() != columns_.size()) {
    throw InvariantError("table '" + name_ + "': row has " + std::to_string(row.size()) + " cells, expected " +
                         std::to_string(columns_.size()));
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    const auto want = static_cast<std::size_t>(columns_[i].type);
    if (row[i].index() != want) {
      throw InvariantError("table '" + name_ + "': column '" + columns_[i].name + "' expects " +
                           std::string(to_string(columns_[i].type)));
    }
  }
  rows_.push_back(std::move(row));
}

namespace {

std::string escape_text(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render(const Cell& cell) {
  if (auto s = std::get_if<std::string>(&cell)) return escape_text(*s);
  if (auto i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  return format_real(std::get<double>(cell));
}

}  // namespace

std::string ReportTable::to_tsv() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out += '\t';
    out += columns_[i].name;
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += '\t';
      out += render(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::string ReportTable::metadata_json() const {
  json cols = json::array();
  for (const auto& c : columns_) cols.push_back({{"name", c.name}, {"type", std::string(to_string(c.type))}});
  json j = {
      {"table", name_},
      {"columns", cols},
      {"rows", rows_.size()},
      {"seed", metadata_.seed ? json(*metadata_.seed) : json(nullptr)},
      {"inputs", metadata_.inputs},
      {"parameters", metadata_.parameters},
      {"tool_version", metadata_.tool_version},
      {"template_version", metadata_.template_version},
      {"tsv_sha256", sha256_hex(to_tsv())},
  };
  return j.dump(2) + "\n";
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

}  // namespace

void ReportTable::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_file(dir / (name_ + ".tsv"), to_tsv());
  write_file(dir / (name_ + ".meta.json"), metadata_json());
}

namespace {

/// Per-key score accumulation that reports every unrated contribution.
class CellAccumulator {
 public:
  CellAccumulator(const QualityScores& scores, const std::vector<CriterionId>& criteria)
      : scores_(scores), criteria_(criteria) {}

  /// Returns false when any criterion is unrated; the gap is recorded.
  bool add(std::map<CriterionId, std::vector<double>>& cell, const std::string& id) {
    std::vector<double> values;
    for (auto crit : criteria_) {
      auto s = scores_.get(id, crit);
      if (!s) {
        missing_.push_back(id + "/" + std::string(to_string(crit)));
        return false;
      }
      values.push_back(*s);
    }
    for (std::size_t i = 0; i < criteria_.size(); ++i) cell[criteria_[i]].push_back(values[i]);
    return true;
  }

  void check() const {
    if (missing_.empty()) return;
    std::ostringstream os;
    os << missing_.size() << " filtered contribution rating(s) missing:";
    for (std::size_t i = 0; i < missing_.size() && i < 10; ++i) os << ' ' << missing_[i];
    if (missing_.size() > 10) os << " ...";
    throw AnalysisError(os.str());
  }

 private:
  const QualityScores& scores_;
  const std::vector<CriterionId>& criteria_;
  std::vector<std::string> missing_;
};

std::map<CriterionId, double> means_of(const std::map<CriterionId, std::vector<double>>& cell) {
  std::map<CriterionId, double> out;
  for (const auto& [crit, xs] : cell) out[crit] = mean(xs);
  return out;
}

}  // namespace

RoomQuality room_quality(const QualityScores& scores, const Corpus& corpus, const std::vector<Contribution>& filtered,
                         const std::vector<CriterionId>& criteria) {
  CellAccumulator acc(scores, criteria);
  std::map<std::string, std::map<CriterionId, std::vector<double>>> by_room;
  for (const auto& c : filtered) acc.add(by_room[c.room_id], c.id);
  acc.check();

  RoomQuality out;
  std::map<std::string, std::map<CriterionId, std::vector<double>>> by_event;
  for (const auto& [room_id, cell] : by_room) {
    if (cell.empty()) continue;
    RoomQualitySummary s;
    s.room_id = room_id;
    s.event_id = corpus.room(room_id).event_id;
    s.count = cell.begin()->second.size();
    s.means = means_of(cell);
    for (const auto& [crit, m] : s.means) by_event[s.event_id][crit].push_back(m);
    out.rooms.push_back(std::move(s));
  }
  for (const auto& [event_id, cell] : by_event) {
    out.centroids.push_back(EventCentroid{event_id, cell.begin()->second.size(), means_of(cell)});
  }
  return out;
}

namespace {

AgendaQuality agenda_cells(const QualityScores& scores, const Corpus& corpus, const std::vector<Contribution>& filtered,
                           const std::vector<CriterionId>& criteria, bool by_gender) {
  using Key = std::tuple<std::string, std::string, int, std::string>;
  CellAccumulator acc(scores, criteria);
  std::map<Key, std::map<CriterionId, std::vector<double>>> cells;
  AgendaQuality out;
  for (const auto& c : filtered) {
    const auto& room = corpus.room(c.room_id);
    std::string gender;
    if (by_gender) {
      const auto* p = corpus.find_participant(c.participant_id);
      if (p == nullptr || p->gender == Gender::kOtherOrUnknown) {
        ++out.excluded_unknown_gender;
        continue;
      }
      gender = std::string(to_string(p->gender));
    }
    acc.add(cells[Key{room.event_id, room.session_id, c.agenda_item.index, gender}], c.id);
  }
  acc.check();
  for (const auto& [key, cell] : cells) {
    if (cell.empty()) continue;
    AgendaCell a;
    std::tie(a.event_id, a.session_id, a.agenda_item, a.gender) = key;
    a.count = cell.begin()->second.size();
    a.means = means_of(cell);
    out.cells.push_back(std::move(a));
  }
  return out;
}

}  // namespace

AgendaQuality agenda_quality(const QualityScores& scores, const Corpus& corpus,
                             const std::vector<Contribution>& filtered, const std::vector<CriterionId>& criteria) {
  return agenda_cells(scores, corpus, filtered, criteria, false);
}

AgendaQuality agenda_quality_by_gender(const QualityScores& scores, const Corpus& corpus,
                                       const std::vector<Contribution>& filtered,
                                       const std::vector<CriterionId>& criteria) {
  return agenda_cells(scores, corpus, filtered, criteria, true);
}

namespace {

Cell text(std::string_view s) { return std::string(s); }
Cell count(std::size_t n) { return static_cast<std::int64_t>(n); }
Cell real(double v) { return v; }
Cell crit_cell(CriterionId c) { return std::string(to_string(c)); }

Column text_col(std::string name) { return {std::move(name), ColumnType::kText}; }
Column count_col(std::string name) { return {std::move(name), ColumnType::kCount}; }
Column real_col(std::string name) { return {std::move(name), ColumnType::kReal}; }

}  // namespace

ReportTable corpus_stats_table(const CorpusStats& s, TableMetadata meta) {
  ReportTable t("corpus_stats",
                {count_col("events"), count_col("sessions"), count_col("rooms"), count_col("unique_participants"),
                 count_col("contributions"), count_col("filtered_contributions"), real_col("median_room_size"),
                 real_col("mean_room_size"), real_col("mean_filtered_length")},
                std::move(meta));
  t.add_row({count(s.events), count(s.sessions), count(s.rooms), count(s.unique_participants), count(s.contributions),
             count(s.filtered_contributions), real(s.median_room_size), real(s.mean_room_size),
             real(s.mean_filtered_length)});
  return t;
}

ReportTable irr_table(const std::vector<IrrRow>& rows, TableMetadata meta) {
  ReportTable t("irr",
                {text_col("criterion"), count_col("statements"), count_col("raters"), real_col("r_wg_star"),
                 real_col("s_x_squared"), real_col("sigma_eu_squared"), text_col("band")},
                std::move(meta));
  for (const auto& r : rows) {
    t.add_row({crit_cell(r.criterion), count(r.statements), count(r.raters), real(r.result.r_wg_star),
               real(r.result.s_x_squared), real(r.result.sigma_eu_squared),
               text(to_string(irr_band(r.result.r_wg_star)))});
  }
  return t;
}

std::vector<CoverageRow> annotation_coverage(const AnnotationSet& annotations,
                                             const std::vector<Contribution>& contributions,
                                             const std::vector<CriterionId>& criteria, int trials) {
  std::set<std::string> ids;
  for (const auto& c : contributions) ids.insert(c.id);
  std::vector<CoverageRow> out;
  for (auto crit : criteria) {
    CoverageRow row;
    row.criterion = crit;
    row.requested = contributions.size() * static_cast<std::size_t>(trials);
    for (const auto& [key, r] : annotations.ratings()) {
      if (r.criterion == crit && ids.count(r.statement_id)) ++row.rated;
    }
    for (const auto& f : annotations.failures()) {
      if (f.criterion == crit && ids.count(f.statement_id)) ++row.failed;
    }
    out.push_back(row);
  }
  return out;
}

ReportTable coverage_table(const std::vector<CoverageRow>& rows, TableMetadata meta) {
  ReportTable t("annotation_coverage",
                {text_col("criterion"), count_col("requested"), count_col("rated"), count_col("failed"),
                 real_col("coverage")},
                std::move(meta));
  for (const auto& r : rows) {
    const double cov = r.requested ? static_cast<double>(r.rated) / static_cast<double>(r.requested) : 0.0;
    t.add_row({crit_cell(r.criterion), count(r.requested), count(r.rated), count(r.failed), real(cov)});
  }
  return t;
}

ReportTable trial_variance_table(const std::vector<TrialVariance>& rows, TableMetadata meta) {
  ReportTable t("trial_variance", {text_col("criterion"), count_col("statements"), real_col("mean_variance")},
                std::move(meta));
  for (const auto& r : rows) t.add_row({crit_cell(r.criterion), count(r.statements), real(r.mean_variance)});
  return t;
}

ReportTable golden_table(const std::vector<GoldenRow>& rows, TableMetadata meta) {
  ReportTable t("golden_comparison",
                {text_col("criterion"), text_col("scores"), count_col("group_size"), count_col("groups"),
                 real_col("per_statement_wins"), real_col("per_group_wins"), real_col("per_group_wins_1norm")},
                std::move(meta));
  for (const auto& r : rows) {
    t.add_row({crit_cell(r.criterion), text(r.debiased ? "debiased" : "raw"), count(r.comparison.group_size),
               count(r.comparison.num_groups), real(r.comparison.per_statement_wins),
               real(r.comparison.per_group_wins), real(r.comparison.per_group_wins_1norm)});
  }
  return t;
}

ReportTable model_vs_human_table(const std::vector<MeanDiffRow>& rows, TableMetadata meta) {
  ReportTable t("model_vs_human",
                {text_col("criterion"), text_col("scores"), real_col("model_mean"), real_col("human_mean"),
                 real_col("diff"), real_col("ci_lo"), real_col("ci_hi"), count_col("resamples")},
                std::move(meta));
  for (const auto& r : rows) {
    t.add_row({crit_cell(r.criterion), text(r.debiased ? "debiased" : "raw"), real(r.model_mean), real(r.human_mean),
               real(r.diff.point), real(r.diff.lo), real(r.diff.hi), count(static_cast<std::size_t>(r.diff.resamples))});
  }
  return t;
}

ReportTable pair_summary_table(const PairSummary& summary, TableMetadata meta) {
  ReportTable t("pair_evaluations",
                {text_col("breakdown"), text_col("criterion"), text_col("source"), count_col("n"), real_col("mean"),
                 real_col("ci_lo"), real_col("ci_hi")},
                std::move(meta));
  auto emit = [&](std::string_view breakdown, const std::vector<PairSummaryRow>& rows) {
    for (const auto& r : rows) {
      t.add_row({text(breakdown), text(r.criterion), text(r.source), count(r.n), real(r.mean), real(r.ci.lo),
                 real(r.ci.hi)});
    }
  };
  emit("class", summary.by_class);
  emit("source", summary.by_source);
  emit("difference", summary.difference);
  return t;
}

ReportTable nudge_rates_table(const std::vector<RateRow>& rows, TableMetadata meta) {
  ReportTable t("nudge_rates",
                {text_col("target"), text_col("arm"), count_col("responses"), count_col("nudges"), real_col("rate"),
                 real_col("ci_lo"), real_col("ci_hi"), real_col("relative_uplift")},
                std::move(meta));
  for (const auto& r : rows) {
    for (const auto* arm : {&r.rates.sent, &r.rates.skipped}) {
      t.add_row({text(r.target), text(arm == &r.rates.sent ? "sent" : "skipped"), count(arm->numerator),
                 count(arm->denominator), real(arm->rate), real(arm->ci_lo), real(arm->ci_hi),
                 real(r.rates.relative_uplift)});
    }
  }
  return t;
}

ReportTable nudge_intervals_table(const std::vector<BinRate>& rows, TableMetadata meta) {
  ReportTable t("nudge_intervals",
                {text_col("arm"), count_col("bin"), count_col("from_ms"), count_col("to_ms"), count_col("responses"),
                 count_col("nudges"), real_col("rate"), real_col("ci_lo"), real_col("ci_hi")},
                std::move(meta));
  for (const auto& r : rows) {
    t.add_row({text(to_string(r.arm)), count(static_cast<std::size_t>(r.bin)),
               count(static_cast<std::size_t>(r.from.count())), count(static_cast<std::size_t>(r.to.count())),
               count(r.estimate.numerator), count(r.estimate.denominator), real(r.estimate.rate),
               real(r.estimate.ci_lo), real(r.estimate.ci_hi)});
  }
  return t;
}

ReportTable nudge_ordinals_table(const std::vector<OrdinalRate>& rows, TableMetadata meta) {
  ReportTable t("nudge_ordinals",
                {text_col("ordinal"), count_col("responses"), count_col("nudges"), real_col("rate"), real_col("ci_lo"),
                 real_col("ci_hi")},
                std::move(meta));
  for (const auto& r : rows) {
    const std::string label = r.ordinal >= kOrdinalBuckets ? std::to_string(kOrdinalBuckets) + "+"
                                                           : std::to_string(r.ordinal);
    t.add_row({text(label), count(r.estimate.numerator), count(r.estimate.denominator), real(r.estimate.rate),
               real(r.estimate.ci_lo), real(r.estimate.ci_hi)});
  }
  return t;
}

ReportTable quality_comparison_table(std::string name, std::string_view first, std::string_view second,
                                     const std::vector<QualityComparison>& rows, TableMetadata meta) {
  ReportTable t(std::move(name),
                {text_col("criterion"), text_col("first"), text_col("second"), count_col("n_first"),
                 count_col("n_second"), real_col("first_mean"), real_col("second_mean"), real_col("diff"),
                 real_col("ci_lo"), real_col("ci_hi"), real_col("stddev")},
                std::move(meta));
  for (const auto& r : rows) {
    t.add_row({crit_cell(r.criterion), text(first), text(second), count(r.n_first), count(r.n_second),
               real(r.first_mean), real(r.second_mean), real(r.diff.point), real(r.diff.lo), real(r.diff.hi),
               real(r.stddev)});
  }
  return t;
}

ReportTable participant_effect_table(const std::vector<ParticipantEffect>& rows, TableMetadata meta) {
  ReportTable t("participant_effect",
                {text_col("criterion"), count_col("participants"), real_col("effect"), real_col("ci_lo"),
                 real_col("ci_hi")},
                std::move(meta));
  for (const auto& r : rows) {
    t.add_row({crit_cell(r.criterion), count(r.n_participants), real(r.effect.point), real(r.effect.lo),
               real(r.effect.hi)});
  }
  return t;
}

ReportTable activity_correlation_table(const std::vector<ActivityCorrelation>& rows, TableMetadata meta) {
  ReportTable t("activity_correlation", {text_col("criterion"), count_col("participants"), real_col("pearson_r")},
                std::move(meta));
  for (const auto& r : rows) t.add_row({crit_cell(r.criterion), count(r.n_participants), real(r.pearson_r)});
  return t;
}

namespace {

std::vector<Column> with_criteria(std::vector<Column> cols, const std::vector<CriterionId>& criteria) {
  for (auto c : criteria) cols.push_back(real_col("mean_" + std::string(to_string(c))));
  return cols;
}

void append_means(std::vector<Cell>& row, const std::map<CriterionId, double>& means,
                  const std::vector<CriterionId>& criteria) {
  for (auto c : criteria) row.push_back(real(means.at(c)));
}

}  // namespace

ReportTable room_quality_table(const RoomQuality& rq, const std::vector<CriterionId>& criteria, TableMetadata meta) {
  ReportTable t("room_quality", with_criteria({text_col("event"), text_col("room"), count_col("contributions")}, criteria),
                std::move(meta));
  for (const auto& r : rq.rooms) {
    std::vector<Cell> row{text(r.event_id), text(r.room_id), count(r.count)};
    append_means(row, r.means, criteria);
    t.add_row(std::move(row));
  }
  return t;
}

ReportTable event_centroid_table(const RoomQuality& rq, const std::vector<CriterionId>& criteria, TableMetadata meta) {
  ReportTable t("event_centroids", with_criteria({text_col("event"), count_col("rooms")}, criteria), std::move(meta));
  for (const auto& e : rq.centroids) {
    std::vector<Cell> row{text(e.event_id), count(e.rooms)};
    append_means(row, e.means, criteria);
    t.add_row(std::move(row));
  }
  return t;
}

ReportTable agenda_quality_table(std::string name, const AgendaQuality& aq, const std::vector<CriterionId>& criteria,
                                 TableMetadata meta) {
  meta.parameters["excluded_unknown_gender"] = std::to_string(aq.excluded_unknown_gender);
  ReportTable t(std::move(name),
                with_criteria({text_col("event"), text_col("session"), count_col("agenda_item"), text_col("gender"),
                               count_col("contributions")},
                              criteria),
                std::move(meta));
  for (const auto& c : aq.cells) {
    std::vector<Cell> row{text(c.event_id), text(c.session_id), count(static_cast<std::size_t>(c.agenda_item)),
                          text(c.gender.empty() ? "all" : c.gender), count(c.count)};
    append_means(row, c.means, criteria);
    t.add_row(std::move(row));
  }
  return t;
}

}  // namespace delibq
