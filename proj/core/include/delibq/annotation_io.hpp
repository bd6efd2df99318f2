#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "delibq/annotator.hpp"
#include "delibq/benchmarking.hpp"
#include "delibq/reliability.hpp"

namespace delibq {

/// Reads rating records (one JSON object per line). Both plain annotation
/// records and answer-cache records are accepted; failed cache entries become
/// failures.
AnnotationSet read_annotations(const std::filesystem::path& path);
AnnotationSet parse_annotations(std::string_view text);

/// Writes ratings sorted by key, one record per line.
void write_annotations(const std::filesystem::path& path, const AnnotationSet& annotations);
std::string serialize_annotations(const AnnotationSet& annotations);

/// SHA-256 of the canonical serialization; independent of file order and of
/// cache bookkeeping such as timestamps.
std::string annotation_digest(const AnnotationSet& annotations);

std::vector<PairEvaluation> read_pair_evaluations(const std::filesystem::path& path);

/// Statement x rater matrix of one criterion. Raters default to every rater
/// present, sorted. Repeated trials of one human rater are rejected.
RatingMatrix rating_matrix(const AnnotationSet& annotations, CriterionId criterion,
                           const std::vector<std::string>& raters = {});

/// Mean score per statement for one rater and criterion, over trials.
std::vector<double> rater_scores(const AnnotationSet& annotations, CriterionId criterion, const std::string& rater,
                                 const std::vector<std::string>& statements);

}  // namespace delibq
