#include "delibq/annotation_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "delibq/error.hpp"
#include "delibq/hash.hpp"

namespace delibq {

using json = nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename Fn>
void for_each_record(std::string_view text, std::string_view what, Fn&& fn) {
  std::size_t pos = 0, line_no = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw InputError(std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

AnnotationSet parse_annotations(std::string_view text) {
  AnnotationSet set;
  for_each_record(text, "annotations", [&](const json& j) {
    const auto status = j.value("status", std::string("ok"));
    const std::string rater = j.contains("rater") ? j.at("rater").get<std::string>() : j.at("model_id").get<std::string>();
    if (status != "ok") {
      set.add_failure(AnnotationFailure{j.at("statement_id").get<std::string>(),
                                        parse_criterion(j.at("criterion").get<std::string>()), rater,
                                        j.value("trial", 0), j.value("error", std::string("failed")),
                                        j.value("raw_response", std::string())});
      return;
    }
    Rating r;
    r.statement_id = j.at("statement_id").get<std::string>();
    r.criterion = parse_criterion(j.at("criterion").get<std::string>());
    r.rater = rater;
    r.score = j.at("score").get<int>();
    r.justification = j.value("justification", std::string());
    r.trial = j.value("trial", 0);
    set.add(std::move(r));
  });
  return set;
}

AnnotationSet read_annotations(const std::filesystem::path& path) { return parse_annotations(slurp(path)); }

std::string serialize_annotations(const AnnotationSet& annotations) {
  std::string out;
  for (const auto& [key, r] : annotations.ratings()) {
    json j = {{"statement_id", r.statement_id},
              {"criterion", std::string(to_string(r.criterion))},
              {"rater", r.rater},
              {"score", r.score},
              {"justification", r.justification}};
    if (r.trial != 0) j["trial"] = r.trial;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_annotations(const std::filesystem::path& path, const AnnotationSet& annotations) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << serialize_annotations(annotations);
}

std::string annotation_digest(const AnnotationSet& annotations) {
  return sha256_hex(serialize_annotations(annotations));
}

std::vector<PairEvaluation> read_pair_evaluations(const std::filesystem::path& path) {
  std::vector<PairEvaluation> out;
  for_each_record(slurp(path), "pair evaluations", [&](const json& j) {
    PairEvaluation e;
    e.statement_id = j.at("statement_id").get<std::string>();
    e.criterion = j.value("criterion", std::string("all"));
    e.source = j.at("source").get<std::string>();
    e.evaluator = j.at("evaluator").get<std::string>();
    e.score = j.at("score").get<int>();
    out.push_back(std::move(e));
  });
  return out;
}

RatingMatrix rating_matrix(const AnnotationSet& annotations, CriterionId criterion,
                           const std::vector<std::string>& raters) {
  std::vector<std::string> columns = raters;
  std::set<std::string> statements;
  for (const auto& [key, r] : annotations.ratings()) {
    if (r.criterion != criterion) continue;
    if (!raters.empty() && std::find(raters.begin(), raters.end(), r.rater) == raters.end()) continue;
    statements.insert(r.statement_id);
    if (raters.empty() && std::find(columns.begin(), columns.end(), r.rater) == columns.end()) columns.push_back(r.rater);
  }
  if (raters.empty()) std::sort(columns.begin(), columns.end());

  std::map<std::string, std::size_t> col_index, row_index;
  for (std::size_t i = 0; i < columns.size(); ++i) col_index[columns[i]] = i;
  std::vector<std::string> rows(statements.begin(), statements.end());
  for (std::size_t i = 0; i < rows.size(); ++i) row_index[rows[i]] = i;

  RatingMatrix m(rows, columns);
  for (const auto& [key, r] : annotations.ratings()) {
    if (r.criterion != criterion) continue;
    auto c = col_index.find(r.rater);
    if (c == col_index.end()) continue;
    const std::size_t row = row_index.at(r.statement_id);
    if (m.get(row, c->second)) {
      throw InputError("rater '" + r.rater + "' has several trials for statement '" + r.statement_id + "'");
    }
    m.set(row, c->second, r.score);
  }
  return m;
}

std::vector<double> rater_scores(const AnnotationSet& annotations, CriterionId criterion, const std::string& rater,
                                 const std::vector<std::string>& statements) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& [key, r] : annotations.ratings()) {
    if (r.criterion != criterion || r.rater != rater) continue;
    auto& [sum, n] = acc[r.statement_id];
    sum += r.score;
    ++n;
  }
  std::vector<double> out;
  out.reserve(statements.size());
  for (const auto& s : statements) {
    auto it = acc.find(s);
    if (it == acc.end()) {
      throw InputError("rater '" + rater + "' has no " + std::string(to_string(criterion)) + " score for statement '" +
                       s + "'");
    }
    out.push_back(it->second.first / it->second.second);
  }
  return out;
}

}  // namespace delibq
