#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "delibq/annotation_cache.hpp"
#include "delibq/annotation_io.hpp"
#include "delibq/error.hpp"
#include "delibq/hash.hpp"
#include "delibq/pipeline.hpp"

namespace {

using namespace delibq;

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return (v && *v) ? std::string(v) : std::move(fallback);
}

Millis seconds_to_ms(double s) {
  if (!(s > 0.0)) throw InputError("durations must be positive");
  return Millis(std::llround(s * 1000.0));
}

/// Writes tables to `out` or, if empty, prints them to stdout.
void emit(const std::vector<ReportTable>& tables, const std::string& out) {
  for (const auto& t : tables) {
    if (out.empty()) {
      std::cout << "# " << t.name() << '\n' << t.to_tsv();
    } else {
      t.write(out);
      std::cerr << "wrote " << (std::filesystem::path(out) / (t.name() + ".tsv")).string() << '\n';
    }
  }
}

struct ProviderFlags {
  std::string name = "mock";
  std::uint64_t mock_seed = 0;
  std::string table;
  std::string model = "mock";
  std::string base_url = "https://api.openai.com/v1";
  std::string credential_env = "DELIBQ_API_KEY";
  double temperature = 0.0;
  int retries = 2;
  int parallelism = 4;
  int trials = 1;
  std::size_t max_prompt_chars = 100000;
  std::string cache;

  void attach(CLI::App* app) {
    app->add_option("--provider", name, "Completion provider: mock, table or openai")
        ->check(CLI::IsMember({"mock", "table", "openai"}));
    app->add_option("--mock-seed", mock_seed, "Seed of the mock provider");
    app->add_option("--table", table, "Prompt-hash to response JSON for the table provider");
    app->add_option("--model", model, "Model identifier sent to the provider");
    app->add_option("--base-url", base_url, "Base URL of an OpenAI-compatible endpoint");
    app->add_option("--credential-env", credential_env, "Environment variable holding the API key");
    app->add_option("--temperature", temperature, "Sampling temperature");
    app->add_option("--retries", retries, "Extra calls after an unparseable answer")->check(CLI::NonNegativeNumber);
    app->add_option("--parallelism", parallelism, "Concurrent provider calls")->check(CLI::PositiveNumber);
    app->add_option("--trials", trials, "Independent ratings per statement and criterion")
        ->check(CLI::PositiveNumber);
    app->add_option("--max-prompt-chars", max_prompt_chars, "Prompt budget before older context is dropped");
    app->add_option("--cache", cache, "Annotation cache file (default under DELIBQ_CACHE_DIR)");
  }

  ProviderConfig provider() const {
    ProviderConfig c;
    c.name = name;
    c.mock_seed = mock_seed;
    c.table_path = table;
    c.chat.base_url = base_url;
    c.chat.credential_env = credential_env;
    return c;
  }

  AnnotateOptions options() const {
    AnnotateOptions o;
    o.retries = retries;
    o.parallelism = parallelism;
    o.trials = trials;
    o.model_id = model;
    o.prompt.temperature = temperature;
    o.prompt.max_prompt_chars = max_prompt_chars;
    return o;
  }

  std::filesystem::path cache_path() const {
    if (!cache.empty()) return cache;
    return std::filesystem::path(env_or("DELIBQ_CACHE_DIR", ".delibq-cache")) / "annotations.cache.jsonl";
  }
};

TableMetadata corpus_meta(const std::string& corpus, std::size_t min_chars) {
  TableMetadata m;
  m.inputs["corpus"] = sha256_file(corpus);
  m.parameters["min_chars"] = std::to_string(min_chars);
  return m;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Deliberation quality annotation and analysis toolkit", "delibq"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.set_config("--config", "", "INI file; [section] names match subcommands, keys match flag names");
  app.require_subcommand(1);

  const std::string report_dir = env_or("DELIBQ_REPORT_DIR", "");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and print its statistics");
  std::string ingest_corpus_path;
  std::size_t ingest_min = kDefaultMinChars;
  std::string ingest_out = report_dir;
  ingest->add_option("--corpus", ingest_corpus_path, "Corpus record file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--min-chars", ingest_min, "Minimum contribution length in characters");
  ingest->add_option("--out", ingest_out, "Report directory (prints to stdout when empty)");

  // annotate
  auto* annotate_cmd = app.add_subcommand("annotate", "Rate filtered contributions with a completion provider");
  std::string ann_corpus, ann_criteria = "Q1..Q4", ann_output, ann_out = report_dir;
  std::size_t ann_min = kDefaultMinChars;
  ProviderFlags ann_flags;
  annotate_cmd->add_option("--corpus", ann_corpus, "Corpus record file")->required()->check(CLI::ExistingFile);
  annotate_cmd->add_option("--criteria", ann_criteria, "Criteria, e.g. Q1,Q3 or Q1..Q4");
  annotate_cmd->add_option("--min-chars", ann_min, "Minimum contribution length in characters");
  annotate_cmd->add_option("--output", ann_output, "Annotation file to write")->required();
  annotate_cmd->add_option("--out", ann_out, "Report directory for coverage tables");
  ann_flags.attach(annotate_cmd);

  // irr
  auto* irr = app.add_subcommand("irr", "Inter-rater agreement per criterion");
  std::string irr_annotations, irr_criteria = "Q1..Q4", irr_out = report_dir;
  irr->add_option("--annotations", irr_annotations, "Annotation file with several raters")
      ->required()
      ->check(CLI::ExistingFile);
  irr->add_option("--criteria", irr_criteria, "Criteria to evaluate");
  irr->add_option("--out", irr_out, "Report directory (prints to stdout when empty)");

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Compare model ratings against groups of human raters");
  std::string bench_human, bench_model, bench_pairs, bench_criteria = "Q1..Q4", bench_out = report_dir;
  std::vector<std::size_t> group_sizes{1, 2, 3};
  int bench_resamples = kDefaultResamples;
  std::uint64_t bench_seed = 0;
  bool bench_debias = false;
  std::string bench_model_rater;
  bench->add_option("--human", bench_human, "Human annotation file")->required()->check(CLI::ExistingFile);
  bench->add_option("--model", bench_model, "Model annotation file")->required()->check(CLI::ExistingFile);
  bench->add_option("--model-rater", bench_model_rater, "Rater id of the model in the model file");
  bench->add_option("--pair-evals", bench_pairs, "Rating-justification pair evaluations")->check(CLI::ExistingFile);
  bench->add_option("--group-sizes", group_sizes, "Human group sizes")->delimiter(',');
  bench->add_option("--resamples", bench_resamples, "Bootstrap resamples")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_seed, "Random seed");
  bench->add_flag("--debias", bench_debias, "Also report leave-one-out mean-corrected scores");
  bench->add_option("--criteria", bench_criteria, "Criteria to evaluate");
  bench->add_option("--out", bench_out, "Report directory (prints to stdout when empty)");

  // nudge-effect
  auto* nudge = app.add_subcommand("nudge-effect", "Nudge response rates and quality analyses");
  std::string nudge_corpus, nudge_annotations, nudge_criteria = "Q1..Q4", nudge_out = report_dir;
  double window_s = 30.0, bin_s = 5.0;
  int nudge_resamples = kDefaultResamples;
  std::uint64_t nudge_seed = 0;
  std::size_t nudge_min = kDefaultMinChars;
  bool exclude_skipped = false;
  nudge->add_option("--corpus", nudge_corpus, "Corpus record file")->required()->check(CLI::ExistingFile);
  nudge->add_option("--annotations", nudge_annotations, "Quality ratings; omit for response rates only")
      ->check(CLI::ExistingFile);
  nudge->add_option("--window", window_s, "Response window in seconds");
  nudge->add_option("--bin", bin_s, "Delay bin width in seconds");
  nudge->add_option("--resamples", nudge_resamples, "Bootstrap resamples")->check(CLI::PositiveNumber);
  nudge->add_option("--seed", nudge_seed, "Random seed");
  nudge->add_option("--min-chars", nudge_min, "Minimum contribution length in characters");
  nudge->add_option("--criteria", nudge_criteria, "Criteria to evaluate");
  nudge->add_flag("--exclude-skipped-responses", exclude_skipped,
                  "Leave contributions answering skipped nudges out of the comparison group");
  nudge->add_option("--out", nudge_out, "Report directory (prints to stdout when empty)");

  // report
  auto* report = app.add_subcommand("report", "Room, event and agenda-item quality aggregates");
  std::string rep_corpus, rep_annotations, rep_criteria = "Q1..Q4", rep_out = report_dir;
  std::size_t rep_min = kDefaultMinChars;
  report->add_option("--corpus", rep_corpus, "Corpus record file")->required()->check(CLI::ExistingFile);
  report->add_option("--annotations", rep_annotations, "Quality ratings")->required()->check(CLI::ExistingFile);
  report->add_option("--criteria", rep_criteria, "Criteria to aggregate");
  report->add_option("--min-chars", rep_min, "Minimum contribution length in characters");
  report->add_option("--out", rep_out, "Report directory (prints to stdout when empty)");

  // run
  auto* run = app.add_subcommand("run", "Full pipeline into a report directory");
  std::string run_corpus, run_annotations, run_human, run_pairs, run_criteria = "Q1..Q4",
                                                                 run_out = report_dir.empty() ? "report" : report_dir;
  std::size_t run_min = kDefaultMinChars;
  double run_window_s = 30.0, run_bin_s = 5.0;
  int run_resamples = kDefaultResamples;
  std::uint64_t run_seed = 0;
  bool run_debias = false, run_exclude_skipped = false;
  std::vector<std::size_t> run_groups{1, 2, 3};
  ProviderFlags run_flags;
  run->add_option("--corpus", run_corpus, "Corpus record file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Report directory");
  run->add_option("--annotations", run_annotations, "Use these ratings instead of the provider")
      ->check(CLI::ExistingFile);
  run->add_option("--human", run_human, "Human annotation file for agreement and benchmarking")
      ->check(CLI::ExistingFile);
  run->add_option("--pair-evals", run_pairs, "Rating-justification pair evaluations")->check(CLI::ExistingFile);
  run->add_option("--criteria", run_criteria, "Criteria to evaluate");
  run->add_option("--min-chars", run_min, "Minimum contribution length in characters");
  run->add_option("--window", run_window_s, "Response window in seconds");
  run->add_option("--bin", run_bin_s, "Delay bin width in seconds");
  run->add_option("--group-sizes", run_groups, "Human group sizes")->delimiter(',');
  run->add_option("--resamples", run_resamples, "Bootstrap resamples")->check(CLI::PositiveNumber);
  run->add_option("--seed", run_seed, "Random seed");
  run->add_flag("--debias", run_debias, "Also report mean-corrected model scores");
  run->add_flag("--exclude-skipped-responses", run_exclude_skipped,
                "Leave contributions answering skipped nudges out of the comparison group");
  run_flags.attach(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kInputError);
  }

  if (ingest->parsed()) {
    const auto corpus = ingest_corpus(ingest_corpus_path);
    emit({corpus_stats_table(corpus_stats(corpus, ingest_min), corpus_meta(ingest_corpus_path, ingest_min))},
         ingest_out);
  } else if (annotate_cmd->parsed()) {
    const auto corpus = ingest_corpus(ann_corpus);
    const auto filtered = filter_contributions(corpus, ann_min);
    const auto criteria = parse_criteria_list(ann_criteria);
    auto provider = make_provider(ann_flags.provider());
    AnnotationCache cache(ann_flags.cache_path());
    const auto options = ann_flags.options();
    const auto res = annotate(corpus, filtered, criteria, *provider, cache, options);
    write_annotations(ann_output, res.annotations);
    std::cerr << "requested " << res.stats.requested << ", cache hits " << res.stats.cache_hits << ", provider calls "
              << res.stats.provider_calls << ", failures " << res.stats.failures << ", truncated prompts "
              << res.stats.truncated_prompts << ", prompt characters " << res.stats.prompt_chars << '\n';
    auto meta = corpus_meta(ann_corpus, ann_min);
    meta.inputs["annotations"] = annotation_digest(res.annotations);
    std::vector<ReportTable> tables{
        coverage_table(annotation_coverage(res.annotations, filtered, criteria, options.trials), meta)};
    if (options.trials > 1) tables.push_back(trial_variance_table(trial_variance(res.annotations, options.model_id), meta));
    emit(tables, ann_out);
  } else if (irr->parsed()) {
    const auto set = read_annotations(irr_annotations);
    TableMetadata meta;
    meta.inputs["annotations"] = sha256_file(irr_annotations);
    emit({irr_report(set, parse_criteria_list(irr_criteria), meta)}, irr_out);
  } else if (bench->parsed()) {
    const auto humans = read_annotations(bench_human);
    const auto model = read_annotations(bench_model);
    TableMetadata meta;
    meta.inputs["human_annotations"] = sha256_file(bench_human);
    meta.inputs["model_annotations"] = sha256_file(bench_model);
    BenchmarkOptions options;
    options.group_sizes = group_sizes;
    options.debias = bench_debias;
    options.resamples = bench_resamples;
    options.seed = bench_seed;
    options.model_rater = bench_model_rater;
    auto tables = benchmark_report(humans, model, parse_criteria_list(bench_criteria), options, meta);
    if (!bench_pairs.empty()) {
      TableMetadata pmeta;
      pmeta.inputs["pair_evaluations"] = sha256_file(bench_pairs);
      pmeta.seed = bench_seed;
      pmeta.parameters["resamples"] = std::to_string(bench_resamples);
      tables.push_back(pair_summary_table(
          summarize_pair_evaluations(read_pair_evaluations(bench_pairs), bench_resamples, bench_seed), pmeta));
    }
    emit(tables, bench_out);
  } else if (nudge->parsed()) {
    const auto corpus = ingest_corpus(nudge_corpus);
    const auto filtered = filter_contributions(corpus, nudge_min);
    NudgeReportOptions options;
    options.window = seconds_to_ms(window_s);
    options.bin = seconds_to_ms(bin_s);
    options.resamples = nudge_resamples;
    options.seed = nudge_seed;
    options.split.exclude_skipped_responses = exclude_skipped;
    auto meta = corpus_meta(nudge_corpus, nudge_min);
    auto tables = nudge_rate_report(corpus, filtered, options, meta);
    if (!nudge_annotations.empty()) {
      const auto set = read_annotations(nudge_annotations);
      set.validate_against(corpus);
      meta.inputs["annotations"] = annotation_digest(set);
      for (auto& t : nudge_quality_report(corpus, filtered, QualityScores(set), parse_criteria_list(nudge_criteria),
                                          options, meta)) {
        tables.push_back(std::move(t));
      }
    }
    emit(tables, nudge_out);
  } else if (report->parsed()) {
    const auto corpus = ingest_corpus(rep_corpus);
    const auto filtered = filter_contributions(corpus, rep_min);
    const auto set = read_annotations(rep_annotations);
    set.validate_against(corpus);
    auto meta = corpus_meta(rep_corpus, rep_min);
    meta.inputs["annotations"] = annotation_digest(set);
    emit(quality_report(corpus, filtered, QualityScores(set), parse_criteria_list(rep_criteria), meta), rep_out);
  } else if (run->parsed()) {
    PipelineConfig config;
    config.corpus = run_corpus;
    config.out_dir = run_out;
    config.min_chars = run_min;
    config.criteria = parse_criteria_list(run_criteria);
    if (!run_annotations.empty()) config.annotations = run_annotations;
    if (!run_human.empty()) config.human_annotations = run_human;
    if (!run_pairs.empty()) config.pair_evaluations = run_pairs;
    config.cache = run_flags.cache.empty() ? std::filesystem::path() : std::filesystem::path(run_flags.cache);
    config.provider = run_flags.provider();
    config.annotate = run_flags.options();
    config.benchmark.group_sizes = run_groups;
    config.benchmark.debias = run_debias;
    config.nudge.window = seconds_to_ms(run_window_s);
    config.nudge.bin = seconds_to_ms(run_bin_s);
    config.nudge.split.exclude_skipped_responses = run_exclude_skipped;
    config.resamples = run_resamples;
    config.seed = run_seed;
    const auto result = run_pipeline(config);
    std::cerr << "wrote " << result.tables.size() << " tables, provider calls " << result.annotate_stats.provider_calls
              << ", cache hits " << result.annotate_stats.cache_hits << '\n'
              << result.manifest.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const delibq::Error& e) {
    std::cerr << "delibq: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "delibq: internal error: " << e.what() << '\n';
    return static_cast<int>(delibq::ExitCode::kInvariantViolation);
  }
}
