#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace delibq {

/// Event-local timestamps and durations, millisecond resolution.
using Millis = std::chrono::milliseconds;

enum class Gender { kMan, kWoman, kOtherOrUnknown };

std::string_view to_string(Gender g);

enum class Phase { kIntroduction, kAgenda, kQuestionDevelopment };

std::string_view to_string(Phase p);

/// Where in a room's schedule a contribution was made. `index` is meaningful
/// only for the agenda phase and is 1-based.
struct AgendaItem {
  Phase phase = Phase::kAgenda;
  int index = 0;

  friend bool operator==(const AgendaItem&, const AgendaItem&) = default;
  friend auto operator<=>(const AgendaItem&, const AgendaItem&) = default;
};

std::string to_string(const AgendaItem& item);

struct Participant {
  std::string id;
  std::string screen_name;
  Gender gender = Gender::kOtherOrUnknown;
};

struct Contribution {
  std::string id;
  std::string room_id;
  std::string participant_id;
  AgendaItem agenda_item;
  Millis start_time{0};
  std::string transcript;
  std::size_t char_count = 0;
};

struct Room {
  std::string id;
  std::string event_id;
  std::string session_id;
  std::string roomgroup_id;
  std::optional<Millis> active_from;
  std::optional<Millis> active_until;
};

struct RoomGroup {
  std::string id;
  std::vector<std::string> room_ids;
};

struct Session {
  std::string id;
  std::vector<RoomGroup> roomgroups;
};

struct DeliberationEvent {
  std::string id;
  std::string name;
  std::vector<Session> sessions;
};

enum class NudgeArm { kSent, kSkipped };
enum class NudgeKind { kGeneral, kPersonalized, kProcon, kSpeakRoom };

std::string_view to_string(NudgeArm a);
std::string_view to_string(NudgeKind k);

struct NudgeEvent {
  std::string id;
  std::string participant_id;
  std::string room_id;
  Millis time{0};
  NudgeArm arm = NudgeArm::kSent;
  NudgeKind kind = NudgeKind::kGeneral;
  /// 1 for the participant's first individual nudge in the room. Zero for
  /// whole-room nudges, which never take part in the analyses.
  int ordinal = 0;
};

struct SpeakRequest {
  std::string participant_id;
  std::string room_id;
  Millis time{0};
  std::optional<std::string> resulted_in_contribution;
};

/// Characters of a UTF-8 string, counted as Unicode scalar values.
std::size_t count_scalar_values(std::string_view utf8);

/// Immutable, validated deliberation data set. Safe to share between
/// threads once constructed.
class Corpus {
 public:
  Corpus() = default;

  const std::vector<DeliberationEvent>& events() const { return events_; }
  const std::map<std::string, Participant>& participants() const { return participants_; }
  const std::map<std::string, Room>& rooms() const { return rooms_; }
  /// All contributions, ordered by (room id, start time, contribution id).
  const std::vector<Contribution>& contributions() const { return contributions_; }
  const std::vector<NudgeEvent>& nudges() const { return nudges_; }
  const std::vector<SpeakRequest>& speak_requests() const { return speak_requests_; }

  const Contribution* find_contribution(std::string_view id) const;
  const Participant* find_participant(std::string_view id) const;
  const Room& room(std::string_view id) const;

  /// Proposal text of an agenda item within a session, if the corpus has one.
  const std::string* topic(std::string_view session_id, int agenda_index) const;

 private:
  friend class CorpusBuilder;

  std::vector<DeliberationEvent> events_;
  std::map<std::string, Participant> participants_;
  std::map<std::string, Room> rooms_;
  std::vector<Contribution> contributions_;
  std::map<std::string, std::size_t, std::less<>> contribution_index_;
  std::map<std::pair<std::string, int>, std::string> topics_;
  std::vector<NudgeEvent> nudges_;
  std::vector<SpeakRequest> speak_requests_;
};

enum class CorpusFormat { kJsonLines };

/// Reads a line-delimited record file (see docs/formats.md). Throws
/// InputError listing every offending line.
Corpus ingest_corpus(const std::filesystem::path& path, CorpusFormat format = CorpusFormat::kJsonLines);
Corpus parse_corpus(std::string_view text, CorpusFormat format = CorpusFormat::kJsonLines);

inline constexpr std::size_t kDefaultMinChars = 100;

/// Agenda-phase contributions with at least `min_chars` characters, in
/// (room, start time) order.
std::vector<Contribution> filter_contributions(const Corpus& corpus, std::size_t min_chars = kDefaultMinChars);
std::vector<Contribution> filter_contributions(const std::vector<Contribution>& contributions,
                                               std::size_t min_chars = kDefaultMinChars);

struct DiscussionContext {
  std::string topic;
  std::vector<Contribution> prior_contributions;
  Contribution target;
};

DiscussionContext context_for(const Contribution& target, const Corpus& corpus);
DiscussionContext context_for(std::string_view target_id, const Corpus& corpus);

/// Row of the per-roomset statistics table.
struct CorpusStats {
  std::size_t events = 0;
  std::size_t sessions = 0;
  std::size_t rooms = 0;
  std::size_t unique_participants = 0;
  std::size_t contributions = 0;
  std::size_t filtered_contributions = 0;
  double median_room_size = 0.0;
  double mean_room_size = 0.0;
  double mean_filtered_length = 0.0;
};

/// Room size is the number of distinct speakers in the room over all phases.
CorpusStats corpus_stats(const Corpus& corpus, std::size_t min_chars = kDefaultMinChars);

}  // namespace delibq
