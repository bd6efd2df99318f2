#pragma once

// Brute-force reference implementations used by the tests. They share no
// code with the library beyond its plain data types.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "delibq/corpus.hpp"
#include "delibq/nudge.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<int>>;  // [statement][rater]

inline double rwg_star(const Matrix& m, int options = 5) {
  double total = 0.0;
  for (const auto& row : m) {
    double sum = 0.0;
    for (int x : row) sum += x;
    const double mu = sum / static_cast<double>(row.size());
    double ss = 0.0;
    for (int x : row) ss += (x - mu) * (x - mu);
    total += ss / static_cast<double>(row.size() - 1);
  }
  const double s2 = total / static_cast<double>(m.size());
  return 1.0 - s2 / ((options * options - 1) / 12.0);
}

struct Fractions {
  double per_statement = 0.0;
  double per_group = 0.0;
  double per_group_1norm = 0.0;
  std::size_t groups = 0;
};

inline double point(double model_err, double group_err) {
  if (std::abs(model_err - group_err) <= 1e-12) return 0.5;
  return model_err < group_err ? 1.0 : 0.0;
}

/// Every size-g rater subset via bitmasks, golden rating from the rest.
inline Fractions model_vs_groups(const Matrix& m, const std::vector<double>& model, std::size_t g) {
  const std::size_t n = m.front().size();
  Fractions f;
  double statement_pts = 0.0, group_pts = 0.0, l1_pts = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != g) continue;
    ++f.groups;
    double wins = 0, losses = 0, model_l1 = 0, group_l1 = 0;
    for (std::size_t s = 0; s < m.size(); ++s) {
      double in_sum = 0, out_sum = 0;
      double in_n = 0, out_n = 0;
      for (std::size_t r = 0; r < n; ++r) {
        if (mask & (1u << r)) {
          in_sum += m[s][r];
          in_n += 1;
        } else {
          out_sum += m[s][r];
          out_n += 1;
        }
      }
      const double golden = out_sum / out_n;
      const double me = std::abs(model[s] - golden);
      const double ge = std::abs(in_sum / in_n - golden);
      const double p = point(me, ge);
      statement_pts += p;
      if (p == 1.0) wins += 1;
      if (p == 0.0) losses += 1;
      model_l1 += me;
      group_l1 += ge;
    }
    group_pts += wins > losses ? 1.0 : (wins == losses ? 0.5 : 0.0);
    l1_pts += point(model_l1, group_l1);
  }
  const double gs = static_cast<double>(f.groups);
  f.per_statement = statement_pts / (gs * static_cast<double>(m.size()));
  f.per_group = group_pts / gs;
  f.per_group_1norm = l1_pts / gs;
  return f;
}

/// Leave-one-out bias by explicit inner loop.
inline std::vector<double> debias(const std::vector<double>& model, const std::vector<double>& human) {
  std::vector<double> out;
  for (std::size_t s = 0; s < model.size(); ++s) {
    double sum = 0.0;
    for (std::size_t t = 0; t < model.size(); ++t) {
      if (t != s) sum += model[t] - human[t];
    }
    out.push_back(model[s] - sum / static_cast<double>(model.size() - 1));
  }
  return out;
}

struct Link {
  std::string nudge_id;
  bool responded = false;
  long long delay_ms = 0;
  std::optional<std::string> contribution;
};

/// All-pairs greedy matcher: nudges in (time, id) order, each scanning every
/// request for the earliest unused eligible one (ties by input position).
inline std::vector<Link> link(const std::vector<delibq::NudgeEvent>& nudges,
                              const std::vector<delibq::SpeakRequest>& requests, long long window_ms) {
  std::vector<const delibq::NudgeEvent*> order;
  for (const auto& n : nudges) {
    if (n.kind != delibq::NudgeKind::kSpeakRoom) order.push_back(&n);
  }
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) {
    return std::make_tuple(a->time.count(), a->id) < std::make_tuple(b->time.count(), b->id);
  });
  std::vector<bool> used(requests.size(), false);
  std::vector<Link> out;
  for (const auto* n : order) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < requests.size(); ++i) {
      const auto& r = requests[i];
      if (used[i] || r.participant_id != n->participant_id || r.room_id != n->room_id) continue;
      const long long d = r.time.count() - n->time.count();
      if (d <= 0 || d > window_ms) continue;
      if (!best || r.time < requests[*best].time) best = i;
    }
    Link l{n->id};
    if (best) {
      used[*best] = true;
      l.responded = true;
      l.delay_ms = requests[*best].time.count() - n->time.count();
      l.contribution = requests[*best].resulted_in_contribution;
    }
    out.push_back(l);
  }
  return out;
}

/// Per-participant (nudged mean - other mean) by explicit loops.
inline std::map<std::string, double> participant_diffs(const std::vector<delibq::Contribution>& filtered,
                                                       const std::set<std::string>& nudged,
                                                       const std::map<std::string, double>& score) {
  std::map<std::string, std::pair<double, double>> nudged_sum, other_sum;  // (sum, count)
  for (const auto& c : filtered) {
    auto& acc = nudged.count(c.id) ? nudged_sum[c.participant_id] : other_sum[c.participant_id];
    acc.first += score.at(c.id);
    acc.second += 1;
  }
  std::map<std::string, double> out;
  for (const auto& [pid, a] : nudged_sum) {
    auto it = other_sum.find(pid);
    if (it == other_sum.end()) continue;
    out[pid] = a.first / a.second - it->second.first / it->second.second;
  }
  return out;
}

}  // namespace oracle
