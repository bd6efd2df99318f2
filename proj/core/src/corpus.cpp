#include "delibq/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "delibq/error.hpp"

namespace delibq {

using json = nlohmann::json;

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::kMan: return "man";
    case Gender::kWoman: return "woman";
    case Gender::kOtherOrUnknown: return "other";
  }
  return "other";
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::kIntroduction: return "introduction";
    case Phase::kAgenda: return "agenda";
    case Phase::kQuestionDevelopment: return "question_development";
  }
  return "agenda";
}

std::string to_string(const AgendaItem& item) {
  if (item.phase == Phase::kAgenda) return "agenda(" + std::to_string(item.index) + ")";
  return std::string(to_string(item.phase));
}

std::string_view to_string(NudgeArm a) { return a == NudgeArm::kSent ? "sent" : "skipped"; }

std::string_view to_string(NudgeKind k) {
  switch (k) {
    case NudgeKind::kGeneral: return "general";
    case NudgeKind::kPersonalized: return "personalized";
    case NudgeKind::kProcon: return "procon";
    case NudgeKind::kSpeakRoom: return "speak_room";
  }
  return "general";
}

std::size_t count_scalar_values(std::string_view utf8) {
  std::size_t n = 0;
  for (unsigned char c : utf8) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

const Contribution* Corpus::find_contribution(std::string_view id) const {
  auto it = contribution_index_.find(id);
  return it == contribution_index_.end() ? nullptr : &contributions_[it->second];
}

const Participant* Corpus::find_participant(std::string_view id) const {
  auto it = participants_.find(std::string(id));
  return it == participants_.end() ? nullptr : &it->second;
}

const Room& Corpus::room(std::string_view id) const {
  auto it = rooms_.find(std::string(id));
  if (it == rooms_.end()) throw InputError("unknown room id '" + std::string(id) + "'");
  return it->second;
}

const std::string* Corpus::topic(std::string_view session_id, int agenda_index) const {
  auto it = topics_.find({std::string(session_id), agenda_index});
  return it == topics_.end() ? nullptr : &it->second;
}

namespace {

constexpr std::size_t kMaxReportedProblems = 50;

struct Problems {
  std::vector<std::string> lines;

  void add(std::size_t line, const std::string& what) {
    std::ostringstream os;
    if (line > 0) os << "line " << line << ": ";
    os << what;
    lines.push_back(os.str());
  }

  [[noreturn]] void raise() const {
    std::ostringstream os;
    os << "corpus validation failed (" << lines.size() << " problem" << (lines.size() == 1 ? "" : "s") << ")";
    for (std::size_t i = 0; i < lines.size() && i < kMaxReportedProblems; ++i) os << "\n  " << lines[i];
    if (lines.size() > kMaxReportedProblems) os << "\n  ...";
    throw InputError(os.str());
  }
};

// Thrown for a single bad field; caught per record and turned into a problem line.
struct FieldError {
  std::string what;
};

std::string req_string(const json& rec, const char* key) {
  auto it = rec.find(key);
  if (it == rec.end()) throw FieldError{std::string("missing required field '") + key + "'"};
  if (!it->is_string()) throw FieldError{std::string("field '") + key + "' must be a string"};
  auto s = it->get<std::string>();
  if (s.empty()) throw FieldError{std::string("field '") + key + "' must not be empty"};
  return s;
}

std::optional<std::string> opt_string(const json& rec, const char* key) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw FieldError{std::string("field '") + key + "' must be a string"};
  return it->get<std::string>();
}

std::int64_t req_int(const json& rec, const char* key) {
  auto it = rec.find(key);
  if (it == rec.end()) throw FieldError{std::string("missing required field '") + key + "'"};
  if (!it->is_number_integer()) throw FieldError{std::string("field '") + key + "' must be an integer"};
  return it->get<std::int64_t>();
}

std::optional<std::int64_t> opt_int(const json& rec, const char* key) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) throw FieldError{std::string("field '") + key + "' must be an integer"};
  return it->get<std::int64_t>();
}

Phase parse_phase(const std::string& s) {
  if (s == "agenda") return Phase::kAgenda;
  if (s == "introduction") return Phase::kIntroduction;
  if (s == "question_development") return Phase::kQuestionDevelopment;
  throw FieldError{"unknown phase '" + s + "'"};
}

Gender parse_gender(const std::optional<std::string>& s) {
  if (!s || s->empty()) return Gender::kOtherOrUnknown;
  if (*s == "man") return Gender::kMan;
  if (*s == "woman") return Gender::kWoman;
  if (*s == "other" || *s == "unknown") return Gender::kOtherOrUnknown;
  throw FieldError{"unknown gender '" + *s + "'"};
}

NudgeArm parse_arm(const std::string& s) {
  if (s == "sent") return NudgeArm::kSent;
  if (s == "skipped") return NudgeArm::kSkipped;
  throw FieldError{"unknown nudge arm '" + s + "'"};
}

NudgeKind parse_kind(const std::string& s) {
  if (s == "general") return NudgeKind::kGeneral;
  if (s == "personalized") return NudgeKind::kPersonalized;
  if (s == "procon") return NudgeKind::kProcon;
  if (s == "speak_room") return NudgeKind::kSpeakRoom;
  throw FieldError{"unknown nudge kind '" + s + "'"};
}

template <typename T>
struct Located {
  std::size_t line;
  T value;
};

}  // namespace

class CorpusBuilder {
 public:
  void add_line(std::size_t line_no, std::string_view line) {
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      problems_.add(line_no, std::string("malformed record: ") + e.what());
      return;
    }
    try {
      if (!rec.is_object()) throw FieldError{"record must be a JSON object"};
      for (const auto& [key, value] : rec.items()) {
        if (value.is_object() || value.is_array()) throw FieldError{"field '" + key + "' is not a flat value"};
      }
      const std::string type = req_string(rec, "type");
      if (type == "event") {
        add_event(line_no, rec);
      } else if (type == "room") {
        add_room(line_no, rec);
      } else if (type == "agenda_item") {
        add_agenda_item(line_no, rec);
      } else if (type == "participant") {
        add_participant(line_no, rec);
      } else if (type == "contribution") {
        add_contribution(line_no, rec);
      } else if (type == "nudge") {
        add_nudge(line_no, rec);
      } else if (type == "speak_request") {
        add_speak_request(line_no, rec);
      } else {
        throw FieldError{"unknown record type '" + type + "'"};
      }
    } catch (const FieldError& e) {
      problems_.add(line_no, e.what);
    }
  }

  Corpus build() {
    Corpus c;
    resolve_rooms(c);
    resolve_participants(c);
    resolve_contributions(c);
    resolve_nudges(c);
    resolve_requests(c);
    for (auto& [key, located] : topics_) c.topics_.emplace(key, located.value);
    if (!problems_.lines.empty()) problems_.raise();
    return c;
  }

 private:
  void add_event(std::size_t line, const json& rec) {
    DeliberationEvent e;
    e.id = req_string(rec, "id");
    e.name = opt_string(rec, "name").value_or(e.id);
    if (!event_ids_.insert(e.id).second) throw FieldError{"duplicate event id '" + e.id + "'"};
    events_.push_back({line, std::move(e)});
  }

  void add_room(std::size_t line, const json& rec) {
    Room r;
    r.id = req_string(rec, "id");
    r.event_id = req_string(rec, "event_id");
    r.session_id = req_string(rec, "session_id");
    r.roomgroup_id = req_string(rec, "roomgroup_id");
    if (auto v = opt_int(rec, "active_from_ms")) r.active_from = Millis(*v);
    if (auto v = opt_int(rec, "active_until_ms")) r.active_until = Millis(*v);
    if (r.active_from && r.active_until && *r.active_until < *r.active_from) {
      throw FieldError{"room '" + r.id + "' active span ends before it starts"};
    }
    if (room_lines_.count(r.id)) throw FieldError{"duplicate room id '" + r.id + "'"};
    room_lines_[r.id] = line;
    rooms_.push_back({line, std::move(r)});
  }

  void add_agenda_item(std::size_t line, const json& rec) {
    auto session = req_string(rec, "session_id");
    auto index = req_int(rec, "index");
    if (index < 1) throw FieldError{"agenda item index must be >= 1"};
    auto topic = req_string(rec, "topic");
    auto key = std::make_pair(session, static_cast<int>(index));
    if (topics_.count(key)) {
      throw FieldError{"duplicate agenda item " + std::to_string(index) + " for session '" + session + "'"};
    }
    topics_.emplace(key, Located<std::string>{line, std::move(topic)});
  }

  void add_participant(std::size_t line, const json& rec) {
    Participant p;
    p.id = req_string(rec, "id");
    p.screen_name = opt_string(rec, "screen_name").value_or(p.id);
    p.gender = parse_gender(opt_string(rec, "gender"));
    if (participants_.count(p.id)) throw FieldError{"duplicate participant id '" + p.id + "'"};
    auto id = p.id;
    participants_.emplace(std::move(id), Located<Participant>{line, std::move(p)});
  }

  void add_contribution(std::size_t line, const json& rec) {
    Contribution c;
    c.id = req_string(rec, "id");
    c.room_id = req_string(rec, "room_id");
    c.participant_id = req_string(rec, "participant_id");
    c.agenda_item.phase = parse_phase(req_string(rec, "phase"));
    if (c.agenda_item.phase == Phase::kAgenda) {
      auto idx = req_int(rec, "agenda_item");
      if (idx < 1) throw FieldError{"agenda_item must be >= 1"};
      c.agenda_item.index = static_cast<int>(idx);
    }
    c.start_time = Millis(req_int(rec, "start_ms"));
    auto it = rec.find("transcript");
    if (it == rec.end() || !it->is_string()) throw FieldError{"field 'transcript' must be a string"};
    c.transcript = it->get<std::string>();
    c.char_count = count_scalar_values(c.transcript);
    if (auto declared = opt_int(rec, "char_count"); declared && static_cast<std::size_t>(*declared) != c.char_count) {
      throw FieldError{"char_count " + std::to_string(*declared) + " does not match transcript length " +
                       std::to_string(c.char_count)};
    }
    if (auto [pos, fresh] = contribution_lines_.emplace(c.id, line); !fresh) {
      throw FieldError{"duplicate contribution id '" + c.id + "' (first seen on line " + std::to_string(pos->second) +
                       ")"};
    }
    contributions_.push_back({line, std::move(c)});
  }

  void add_nudge(std::size_t line, const json& rec) {
    NudgeEvent n;
    n.id = req_string(rec, "id");
    n.participant_id = req_string(rec, "participant_id");
    n.room_id = req_string(rec, "room_id");
    n.time = Millis(req_int(rec, "time_ms"));
    n.arm = parse_arm(req_string(rec, "arm"));
    n.kind = parse_kind(req_string(rec, "kind"));
    if (auto ord = opt_int(rec, "ordinal")) {
      if (*ord < 1) throw FieldError{"nudge ordinal must be >= 1"};
      n.ordinal = static_cast<int>(*ord);
    }
    if (!nudge_ids_.insert(n.id).second) throw FieldError{"duplicate nudge id '" + n.id + "'"};
    nudges_.push_back({line, std::move(n)});
  }

  void add_speak_request(std::size_t line, const json& rec) {
    SpeakRequest r;
    r.participant_id = req_string(rec, "participant_id");
    r.room_id = req_string(rec, "room_id");
    r.time = Millis(req_int(rec, "time_ms"));
    r.resulted_in_contribution = opt_string(rec, "contribution_id");
    if (r.resulted_in_contribution && r.resulted_in_contribution->empty()) r.resulted_in_contribution.reset();
    requests_.push_back({line, std::move(r)});
  }

  void resolve_rooms(Corpus& c) {
    std::map<std::string, std::string> group_session;
    std::map<std::string, std::string> session_event;
    for (auto& [line, room] : rooms_) {
      if (!event_ids_.count(room.event_id)) {
        problems_.add(line, "room '" + room.id + "' references unknown event '" + room.event_id + "'");
        continue;
      }
      auto [g, g_new] = group_session.emplace(room.roomgroup_id, room.session_id);
      if (!g_new && g->second != room.session_id) {
        problems_.add(line, "roomgroup '" + room.roomgroup_id + "' appears in sessions '" + g->second + "' and '" +
                                room.session_id + "'");
        continue;
      }
      auto [s, s_new] = session_event.emplace(room.session_id, room.event_id);
      if (!s_new && s->second != room.event_id) {
        problems_.add(line, "session '" + room.session_id + "' appears in events '" + s->second + "' and '" +
                                room.event_id + "'");
        continue;
      }
      c.rooms_.emplace(room.id, room);
    }

    // Nested view; deterministic order by id at every level.
    std::map<std::string, std::map<std::string, std::map<std::string, std::vector<std::string>>>> tree;
    for (const auto& [id, room] : c.rooms_) tree[room.event_id][room.session_id][room.roomgroup_id].push_back(id);
    std::sort(events_.begin(), events_.end(),
              [](const auto& a, const auto& b) { return a.value.id < b.value.id; });
    for (auto& [line, event] : events_) {
      for (auto& [session_id, groups] : tree[event.id]) {
        Session s{session_id, {}};
        for (auto& [group_id, room_ids] : groups) s.roomgroups.push_back(RoomGroup{group_id, room_ids});
        event.sessions.push_back(std::move(s));
      }
      c.events_.push_back(event);
    }
  }

  void resolve_participants(Corpus& c) {
    for (auto& [id, located] : participants_) c.participants_.emplace(id, located.value);
  }

  bool check_refs(std::size_t line, const Corpus& c, const std::string& what, const std::string& room_id,
                  const std::string& participant_id) {
    bool ok = true;
    if (!c.rooms_.count(room_id)) {
      problems_.add(line, what + " references unknown room '" + room_id + "'");
      ok = false;
    }
    if (!c.participants_.count(participant_id)) {
      problems_.add(line, what + " references unknown participant '" + participant_id + "'");
      ok = false;
    }
    return ok;
  }

  void resolve_contributions(Corpus& c) {
    for (auto& [line, contrib] : contributions_) {
      if (!check_refs(line, c, "contribution '" + contrib.id + "'", contrib.room_id, contrib.participant_id)) continue;
      c.contributions_.push_back(contrib);
    }
    std::sort(c.contributions_.begin(), c.contributions_.end(), [](const Contribution& a, const Contribution& b) {
      return std::tie(a.room_id, a.start_time, a.id) < std::tie(b.room_id, b.start_time, b.id);
    });
    for (std::size_t i = 0; i < c.contributions_.size(); ++i) c.contribution_index_.emplace(c.contributions_[i].id, i);
  }

  void resolve_nudges(Corpus& c) {
    std::vector<Located<NudgeEvent>> kept;
    for (auto& located : nudges_) {
      const auto& n = located.value;
      if (check_refs(located.line, c, "nudge '" + n.id + "'", n.room_id, n.participant_id)) kept.push_back(located);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return std::tie(a.value.time, a.value.id) < std::tie(b.value.time, b.value.id);
    });
    // Ordinals count individual nudges of both arms per (participant, room).
    std::map<std::pair<std::string, std::string>, int> seen;
    for (auto& [line, n] : kept) {
      if (n.kind == NudgeKind::kSpeakRoom) {
        n.ordinal = 0;
        c.nudges_.push_back(n);
        continue;
      }
      int& last = seen[{n.participant_id, n.room_id}];
      if (n.ordinal == 0) {
        n.ordinal = last + 1;
      } else if (n.ordinal <= last) {
        problems_.add(line, "nudge '" + n.id + "' ordinal " + std::to_string(n.ordinal) +
                                " is not strictly increasing for its participant and room");
      }
      last = n.ordinal;
      c.nudges_.push_back(n);
    }
  }

  void resolve_requests(Corpus& c) {
    for (auto& [line, r] : requests_) {
      if (!check_refs(line, c, "speak_request", r.room_id, r.participant_id)) continue;
      const Room& room = c.rooms_.at(r.room_id);
      if ((room.active_from && r.time < *room.active_from) || (room.active_until && r.time > *room.active_until)) {
        problems_.add(line, "speak_request outside the active span of room '" + r.room_id + "'");
        continue;
      }
      if (r.resulted_in_contribution) {
        const Contribution* target = c.find_contribution(*r.resulted_in_contribution);
        if (!target) {
          problems_.add(line, "speak_request references unknown contribution '" + *r.resulted_in_contribution + "'");
          continue;
        }
        if (target->participant_id != r.participant_id || target->room_id != r.room_id) {
          problems_.add(line, "speak_request contribution '" + target->id + "' belongs to another participant or room");
          continue;
        }
      }
      c.speak_requests_.push_back(r);
    }
    std::stable_sort(c.speak_requests_.begin(), c.speak_requests_.end(),
                     [](const SpeakRequest& a, const SpeakRequest& b) { return a.time < b.time; });
  }

  Problems problems_;
  std::set<std::string> event_ids_;
  std::vector<Located<DeliberationEvent>> events_;
  std::map<std::string, std::size_t> room_lines_;
  std::vector<Located<Room>> rooms_;
  std::map<std::pair<std::string, int>, Located<std::string>> topics_;
  std::map<std::string, Located<Participant>> participants_;
  std::unordered_map<std::string, std::size_t> contribution_lines_;
  std::vector<Located<Contribution>> contributions_;
  std::set<std::string> nudge_ids_;
  std::vector<Located<NudgeEvent>> nudges_;
  std::vector<Located<SpeakRequest>> requests_;
};

Corpus parse_corpus(std::string_view text, CorpusFormat format) {
  if (format != CorpusFormat::kJsonLines) throw InputError("unsupported corpus format");
  CorpusBuilder builder;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) builder.add_line(line_no, line);
    pos = end + 1;
  }
  return builder.build();
}

Corpus ingest_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read corpus file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), format);
}

std::vector<Contribution> filter_contributions(const std::vector<Contribution>& contributions,
                                               std::size_t min_chars) {
  std::vector<Contribution> out;
  for (const auto& c : contributions) {
    if (c.agenda_item.phase == Phase::kAgenda && c.char_count >= min_chars) out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const Contribution& a, const Contribution& b) {
    return std::tie(a.room_id, a.start_time, a.id) < std::tie(b.room_id, b.start_time, b.id);
  });
  return out;
}

std::vector<Contribution> filter_contributions(const Corpus& corpus, std::size_t min_chars) {
  return filter_contributions(corpus.contributions(), min_chars);
}

DiscussionContext context_for(const Contribution& target, const Corpus& corpus) {
  const Contribution* stored = corpus.find_contribution(target.id);
  if (!stored) throw InputError("contribution '" + target.id + "' is not in the corpus");
  if (stored->agenda_item.phase != Phase::kAgenda) {
    throw InputError("contribution '" + target.id + "' is not part of an agenda item");
  }
  const Room& room = corpus.room(stored->room_id);
  const std::string* topic = corpus.topic(room.session_id, stored->agenda_item.index);
  if (!topic) {
    throw InputError("agenda item " + std::to_string(stored->agenda_item.index) + " of session '" + room.session_id +
                     "' has no topic text");
  }

  DiscussionContext ctx;
  ctx.topic = *topic;
  ctx.target = *stored;
  // Contributions are stored grouped by room and sorted by time.
  const auto& all = corpus.contributions();
  auto first = std::lower_bound(all.begin(), all.end(), stored->room_id,
                                [](const Contribution& c, const std::string& room_id) { return c.room_id < room_id; });
  for (auto it = first; it != all.end() && it->room_id == stored->room_id; ++it) {
    if (it->start_time >= stored->start_time) break;
    if (it->agenda_item == stored->agenda_item) ctx.prior_contributions.push_back(*it);
  }
  return ctx;
}

DiscussionContext context_for(std::string_view target_id, const Corpus& corpus) {
  const Contribution* c = corpus.find_contribution(target_id);
  if (!c) throw InputError("contribution '" + std::string(target_id) + "' is not in the corpus");
  return context_for(*c, corpus);
}

CorpusStats corpus_stats(const Corpus& corpus, std::size_t min_chars) {
  CorpusStats s;
  s.events = corpus.events().size();
  for (const auto& e : corpus.events()) s.sessions += e.sessions.size();
  s.rooms = corpus.rooms().size();
  s.contributions = corpus.contributions().size();

  std::map<std::string, std::set<std::string>> speakers;
  std::set<std::string> everyone;
  for (const auto& c : corpus.contributions()) {
    speakers[c.room_id].insert(c.participant_id);
    everyone.insert(c.participant_id);
  }
  s.unique_participants = everyone.size();

  std::vector<double> sizes;
  for (const auto& [id, room] : corpus.rooms()) {
    auto it = speakers.find(id);
    sizes.push_back(it == speakers.end() ? 0.0 : static_cast<double>(it->second.size()));
  }
  if (!sizes.empty()) {
    std::sort(sizes.begin(), sizes.end());
    const std::size_t n = sizes.size();
    s.median_room_size = n % 2 == 1 ? sizes[n / 2] : (sizes[n / 2 - 1] + sizes[n / 2]) / 2.0;
    double total = 0.0;
    for (double v : sizes) total += v;
    s.mean_room_size = total / static_cast<double>(n);
  }

  auto filtered = filter_contributions(corpus, min_chars);
  s.filtered_contributions = filtered.size();
  if (!filtered.empty()) {
    double chars = 0.0;
    for (const auto& c : filtered) chars += static_cast<double>(c.char_count);
    s.mean_filtered_length = chars / static_cast<double>(filtered.size());
  }
  return s;
}

}  // namespace delibq
