#include <algorithm>
#include <regex>
#include <sstream>

#include "delibq/annotator.hpp"
#include "delibq/hash.hpp"

namespace delibq {
namespace {

constexpr std::array<Criterion, 4> kCriteria{{
    {CriterionId::kQ1, "This statement includes examples or anecdotes to support the speaker's point."},
    {CriterionId::kQ2, "This statement introduces novel ideas, perspectives, or solutions."},
    {CriterionId::kQ3, "This statement builds on top of the previous statements and the proposal."},
    {CriterionId::kQ4, "This statement raises points which will likely improve the quality of the following discussion."},
}};

constexpr std::string_view kSystemInstructions =
    "Your expertise is required to help a research study to evaluate the quality of statements made in a "
    "deliberation on a topic of social interest.";

// Placeholders: {topic}, {criterion}, {previous}, {statement}.
constexpr std::string_view kTaskTemplate =
    "You are observing a live deliberation on the following proposals {topic}.\n"
    "The input is from a noisy speech-to-text system. Your task is to evaluate a statement in the context of the "
    "ongoing discussion. Specifically, you have to rate it on the standard Likert scale on 1 to 5 on whether: "
    "{criterion}.\n"
    "This is what the rating on the standard Likert scale means. 1: Strongly Disagree. 2: Disagree. 3: Undecided. "
    "4: Agree. 5: Strongly Agree.\n"
    "\n"
    "Please give a succinct justification in one short sentence. Format your answer as follows:\n"
    "Rating: x/5. Justification: [One short sentence].\n"
    "\n"
    "Here is the transcript of the deliberation from before the statement which is to be evaluated. This serves as "
    "the context for the evaluation. {previous}.\n"
    "\n"
    "Here is the statement which you have to evaluate. {statement}.";

std::string render_task(std::string_view topic, std::string_view criterion_text, std::string_view previous,
                        std::string_view statement) {
  // Substitute in template order so placeholder-like text inside values is
  // never re-expanded.
  std::string out;
  std::string_view rest = kTaskTemplate;
  const std::pair<std::string_view, std::string_view> subs[] = {
      {"{topic}", topic}, {"{criterion}", criterion_text}, {"{previous}", previous}, {"{statement}", statement}};
  for (const auto& [placeholder, value] : subs) {
    auto pos = rest.find(placeholder);
    out.append(rest.substr(0, pos));
    out.append(value);
    rest.remove_prefix(pos + placeholder.size());
  }
  out.append(rest);
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::array<Criterion, 4>& all_criteria() { return kCriteria; }

const Criterion& criterion(CriterionId id) { return kCriteria[static_cast<std::size_t>(id)]; }

std::string_view to_string(CriterionId id) {
  static constexpr std::string_view kNames[] = {"Q1", "Q2", "Q3", "Q4"};
  return kNames[static_cast<std::size_t>(id)];
}

CriterionId parse_criterion(std::string_view text) {
  text = trim(text);
  if (text.size() == 2 && (text[0] == 'Q' || text[0] == 'q') && text[1] >= '1' && text[1] <= '4') {
    return static_cast<CriterionId>(text[1] - '1');
  }
  throw InputError("unknown criterion '" + std::string(text) + "' (expected Q1..Q4)");
}

std::vector<CriterionId> parse_criteria_list(std::string_view text) {
  text = trim(text);
  if (text.empty() || text == "all") return {CriterionId::kQ1, CriterionId::kQ2, CriterionId::kQ3, CriterionId::kQ4};
  if (auto dots = text.find(".."); dots != std::string_view::npos) {
    const auto from = static_cast<int>(parse_criterion(text.substr(0, dots)));
    const auto to = static_cast<int>(parse_criterion(text.substr(dots + 2)));
    if (from > to) throw InputError("empty criterion range '" + std::string(text) + "'");
    std::vector<CriterionId> out;
    for (int i = from; i <= to; ++i) out.push_back(static_cast<CriterionId>(i));
    return out;
  }
  std::vector<CriterionId> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    const auto id = parse_criterion(text.substr(pos, comma - pos));
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    pos = comma + 1;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string prompt_hash(const ProviderRequest& request) {
  std::string material;
  material.reserve(request.system_instructions.size() + request.user_prompt.size() + 1);
  material.append(request.system_instructions);
  material.push_back('\x1e');
  material.append(request.user_prompt);
  return sha256_hex(material);
}

ProviderRequest build_prompt(const DiscussionContext& context, CriterionId criterion_id,
                             const SpeakerNameFn& speaker_name, const PromptOptions& options) {
  std::vector<std::string> lines;
  lines.reserve(context.prior_contributions.size());
  for (const auto& c : context.prior_contributions) lines.push_back(speaker_name(c.participant_id) + ": " + c.transcript);

  auto join = [](const std::vector<std::string>& ls, std::size_t from) {
    std::string out;
    for (std::size_t i = from; i < ls.size(); ++i) {
      if (i > from) out.push_back('\n');
      out.append(ls[i]);
    }
    return out;
  };

  const auto& crit = criterion(criterion_id);
  std::size_t first = 0;
  std::string task = render_task(context.topic, crit.statement_text, join(lines, 0), context.target.transcript);
  if (options.max_prompt_chars > 0) {
    while (count_scalar_values(task) > options.max_prompt_chars && first < lines.size()) {
      ++first;
      task = render_task(context.topic, crit.statement_text, join(lines, first), context.target.transcript);
    }
  }

  ProviderRequest req;
  req.system_instructions = std::string(kSystemInstructions);
  req.user_prompt = std::move(task);
  req.model_id = options.model_id;
  req.temperature = options.temperature;
  req.truncated_prior = first;
  return req;
}

ProviderRequest build_prompt(const DiscussionContext& context, CriterionId criterion_id, const Corpus& corpus,
                             const PromptOptions& options) {
  return build_prompt(
      context, criterion_id,
      [&corpus](const std::string& participant_id) {
        const Participant* p = corpus.find_participant(participant_id);
        return p ? p->screen_name : participant_id;
      },
      options);
}

ParsedRating parse_rating(std::string_view response_text) {
  static const std::regex kRatingPattern(R"(rating\s*:?\s*\**\s*(-?\d+)\s*/\s*5(?!\d))",
                                         std::regex::ECMAScript | std::regex::icase);
  static const std::regex kJustificationMarker(R"(justification\s*:)", std::regex::ECMAScript | std::regex::icase);

  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(response_text.begin(), response_text.end(), m, kRatingPattern)) {
    throw RatingParseError(RatingParseErrorKind::kNoRatingFound, "no 'Rating: x/5' in response");
  }
  const std::string digits = m[1].str();
  int score = 0;
  if (digits.size() > 3) {
    score = -1;
  } else {
    score = std::stoi(digits);
  }
  if (score < 1 || score > 5) {
    throw RatingParseError(RatingParseErrorKind::kScoreOutOfRange, "rating " + digits + "/5 outside 1..5");
  }

  std::string_view rest = response_text.substr(static_cast<std::size_t>(m[0].second - response_text.begin()));
  std::match_results<std::string_view::const_iterator> j;
  if (std::regex_search(rest.begin(), rest.end(), j, kJustificationMarker)) {
    rest = rest.substr(static_cast<std::size_t>(j[0].second - rest.begin()));
  } else {
    rest = trim(rest);
    while (!rest.empty() && (rest.front() == '.' || rest.front() == ',' || rest.front() == ';')) rest.remove_prefix(1);
  }
  auto justification = trim(rest);
  if (justification.empty()) {
    throw RatingParseError(RatingParseErrorKind::kEmptyJustification, "rating has no justification");
  }
  return ParsedRating{score, std::string(justification)};
}

std::string render_rating(int score, std::string_view justification) {
  std::ostringstream os;
  os << "Rating: " << score << "/5. Justification: " << justification;
  return os.str();
}

}  // namespace delibq
