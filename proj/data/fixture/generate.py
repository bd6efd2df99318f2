#!/usr/bin/env python3
"""Generates the bundled fixture corpus and its expected statistics.

The expected values in expected.json are computed here directly from the
generated records, independently of the C++ implementation, and are used as
an oracle by the test suite.

    python3 data/fixture/generate.py data/fixture
"""

import json
import random
import statistics
import sys
from pathlib import Path

SEED = 20240611
SESSION_MS = 3_600_000
INTRO_END = 300_000
ITEM_MS = 900_000
QD_START = INTRO_END + 3 * ITEM_MS
WINDOW_MS = 30_000
MIN_CHARS = 100

WORDS = (
    "we should think about the cost of this proposal for families in smaller towns and whether "
    "public transport can really replace the car when buses only come twice a day I agree that "
    "taxes matter but the question is who pays and how much my neighbour works night shifts "
    "maybe a pilot project first would help us learn before we commit everyone to it what "
    "about the climate goals the city already promised young people care about this a lot "
    "honestly I am not sure the numbers add up but the idea is worth discussing"
).split()
ACCENTED = ["café", "Zürich", "naïve", "façade", "Müller", "señora", "Öffentlichkeit", "€20", "crème"]

TOPICS = [
    "Introduce a city-wide congestion charge for private cars in the centre.",
    "Fund free public transport for everyone under 25 through a local tax.",
    "Require new buildings to include rooftop solar panels.",
    "Lower the voting age for municipal elections to 16.",
    "Turn half of the inner-city parking spaces into green areas.",
    "Create citizen assemblies that advise the council every year.",
]


def sentence(rng, n_words):
    words = [rng.choice(WORDS) for _ in range(n_words)]
    if rng.random() < 0.3:
        words.insert(rng.randrange(len(words) + 1), rng.choice(ACCENTED))
    text = " ".join(words)
    return text[0].upper() + text[1:] + "."


def transcript(rng):
    r = rng.random()
    if r < 0.25:
        return sentence(rng, rng.randint(2, 12))
    if r < 0.35:
        # Lengths straddling the filter threshold.
        text = sentence(rng, 25)
        return text[: rng.randint(95, 105)]
    return " ".join(sentence(rng, rng.randint(8, 25)) for _ in range(rng.randint(1, 4)))


def phase_at(t):
    if t < INTRO_END:
        return "introduction", None
    if t >= QD_START:
        return "question_development", None
    return "agenda", 1 + (t - INTRO_END) // ITEM_MS


def build(rng):
    records = []
    events = [
        ("E1", "Spring deliberation", [("E1-S1", ["E1-S1-G1"]), ("E1-S2", ["E1-S2-G1"])], 3),
        ("E2", "Autumn deliberation", [("E2-S1", ["E2-S1-G1", "E2-S1-G2"])], 2),
    ]
    participants = []
    for i in range(1, 41):
        gender = rng.choice(["man", "woman", "man", "woman", "other", None])
        p = {"type": "participant", "id": f"p{i:02d}", "screen_name": f"Speaker {i}"}
        if gender is not None:
            p["gender"] = gender
        participants.append(p)

    rooms, topics = [], []
    topic_i = 0
    for event_id, name, sessions, rooms_per_group in events:
        records.append({"type": "event", "id": event_id, "name": name})
        for session_id, groups in sessions:
            for k in range(1, 4):
                topics.append({"type": "agenda_item", "session_id": session_id, "index": k,
                               "topic": TOPICS[topic_i % len(TOPICS)]})
                topic_i += 1
            for group_id in groups:
                for r in range(1, rooms_per_group + 1):
                    rooms.append({"type": "room", "id": f"{group_id}-R{r}", "event_id": event_id,
                                  "session_id": session_id, "roomgroup_id": group_id,
                                  "active_from_ms": 0, "active_until_ms": SESSION_MS})
    records += rooms + topics + participants

    contributions, nudges, requests = [], [], []
    c_counter = n_counter = 0
    for room in rooms:
        members = rng.sample(participants, rng.randint(5, 8))
        member_ids = [m["id"] for m in members]
        # Introductions, without speak requests.
        for pid in member_ids:
            if rng.random() < 0.8:
                c_counter += 1
                t = rng.randrange(0, INTRO_END - 1000)
                contributions.append((t, pid, room["id"], f"c{c_counter:04d}"))
        # Nudges and the speak requests they may trigger.
        for pid in member_ids:
            for _ in range(rng.randint(2, 7)):
                t = rng.randrange(INTRO_END, QD_START - WINDOW_MS)
                arm = "sent" if rng.random() < 0.8 else "skipped"
                n_counter += 1
                nudges.append({"type": "nudge", "id": f"n{n_counter:04d}", "participant_id": pid,
                               "room_id": room["id"], "time_ms": t, "arm": arm,
                               "kind": rng.choice(["general", "personalized", "procon"])})
                p_respond = 0.45 if arm == "sent" else 0.2
                if rng.random() < p_respond:
                    requests.append([t + rng.randint(1, WINDOW_MS), pid, room["id"]])
        for _ in range(2):
            n_counter += 1
            nudges.append({"type": "nudge", "id": f"n{n_counter:04d}", "participant_id": member_ids[0],
                           "room_id": room["id"], "time_ms": rng.randrange(INTRO_END, QD_START),
                           "arm": "sent", "kind": "speak_room"})
        # Spontaneous requests.
        for pid in member_ids:
            for _ in range(rng.randint(1, 6)):
                requests.append([rng.randrange(INTRO_END, SESSION_MS - 40_000), pid, room["id"]])

    request_records = []
    for t, pid, room_id in sorted(requests):
        rec = {"type": "speak_request", "participant_id": pid, "room_id": room_id, "time_ms": t}
        if rng.random() < 0.88:
            c_counter += 1
            cid = f"c{c_counter:04d}"
            contributions.append((t + rng.randint(2_000, 20_000), pid, room_id, cid))
            rec["contribution_id"] = cid
        request_records.append(rec)

    contribution_records = []
    for t, pid, room_id, cid in sorted(contributions, key=lambda c: c[3]):
        phase, item = phase_at(t)
        text = transcript(rng)
        rec = {"type": "contribution", "id": cid, "room_id": room_id, "participant_id": pid,
               "phase": phase, "start_ms": t, "transcript": text}
        if item is not None:
            rec["agenda_item"] = item
        if rng.random() < 0.5:
            rec["char_count"] = len(text)
        contribution_records.append(rec)

    records += contribution_records + sorted(nudges, key=lambda n: n["id"]) + request_records
    return records


def link(nudges, requests, window):
    """Greedy linker: nudges in (time, id) order take the earliest free request."""
    used = set()
    out = []
    for n in sorted(nudges, key=lambda n: (n["time_ms"], n["id"])):
        if n["kind"] == "speak_room":
            continue
        best = None
        for i, r in enumerate(requests):
            if i in used or r["participant_id"] != n["participant_id"] or r["room_id"] != n["room_id"]:
                continue
            d = r["time_ms"] - n["time_ms"]
            if 0 < d <= window and (best is None or (r["time_ms"], i) < (requests[best]["time_ms"], best)):
                best = i
        if best is not None:
            used.add(best)
        out.append((n, None if best is None else requests[best]))
    return out


def expected(records):
    by_type = {}
    for r in records:
        by_type.setdefault(r["type"], []).append(r)
    contributions = by_type["contribution"]
    rooms = by_type["room"]
    speakers = {room["id"]: set() for room in rooms}
    for c in contributions:
        speakers[c["room_id"]].add(c["participant_id"])
    sizes = [len(s) for s in speakers.values()]
    filtered = [c for c in contributions if c["phase"] == "agenda" and len(c["transcript"]) >= MIN_CHARS]
    sessions = {room["session_id"] for room in rooms}

    filtered_ids = {c["id"] for c in filtered}
    counts = {"sent": [0, 0, 0, 0], "skipped": [0, 0, 0, 0]}
    for n, r in link(by_type["nudge"], by_type["speak_request"], WINDOW_MS):
        row = counts[n["arm"]]
        row[0] += 1
        if r is not None:
            row[1] += 1
            if r.get("contribution_id"):
                row[2] += 1
                if r["contribution_id"] in filtered_ids:
                    row[3] += 1

    return {
        "corpus_stats": {
            "events": len(by_type["event"]),
            "sessions": len(sessions),
            "rooms": len(rooms),
            "unique_participants": len({c["participant_id"] for c in contributions}),
            "contributions": len(contributions),
            "filtered_contributions": len(filtered),
            "median_room_size": statistics.median(sizes),
            "mean_room_size": statistics.fmean(sizes),
            "mean_filtered_length": statistics.fmean(len(c["transcript"]) for c in filtered),
        },
        "nudges_30s": {
            arm: {"nudges": v[0], "requests": v[1], "statements": v[2], "filtered_statements": v[3]}
            for arm, v in counts.items()
        },
        "benchmark_statements": sorted(filtered, key=lambda c: (c["room_id"], c["start_ms"], c["id"]))[:30],
    }


def human_annotations(rng, statements):
    lines = []
    for s in statements:
        for q in ["Q1", "Q2", "Q3", "Q4"]:
            latent = rng.uniform(1.5, 4.5)
            for h in range(1, 9):
                score = min(5, max(1, round(latent + rng.gauss(0, 0.9))))
                lines.append({"statement_id": s["id"], "criterion": q, "rater": f"h{h}", "score": score,
                              "justification": "Rated from the transcript."})
    return lines


def pair_evaluations(rng, statements):
    lines = []
    for s in statements:
        authors = ["model"] + rng.sample([f"h{h}" for h in range(1, 9)], 2)
        for source in authors:
            for evaluator in rng.sample([f"h{h}" for h in range(1, 9) if f"h{h}" != source], 3):
                base = 4.1 if source == "model" else 3.6
                score = min(5, max(1, round(base + rng.gauss(0, 0.8))))
                lines.append({"statement_id": s["id"], "criterion": "all", "source": source,
                              "evaluator": evaluator, "score": score})
    return lines


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent)
    rng = random.Random(SEED)
    records = build(rng)
    write_jsonl(out / "corpus.jsonl", records)
    exp = expected(records)
    statements = exp.pop("benchmark_statements")
    write_jsonl(out / "human_annotations.jsonl", human_annotations(rng, statements))
    write_jsonl(out / "pair_evaluations.jsonl", pair_evaluations(rng, statements))
    with open(out / "expected.json", "w", encoding="utf-8") as f:
        json.dump(exp, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
