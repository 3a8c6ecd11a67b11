#ifndef SCOUTGPT_CORPUS_HPP_
#define SCOUTGPT_CORPUS_HPP_

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "scoutgpt/domain.hpp"
#include "scoutgpt/error.hpp"

namespace scoutgpt {

// Episode corpus: newline-delimited JSON, one episode per line.
//
//   {"match_id": str, "start_reason": str,
//    "context": {"on_pitch": [22 ids], "minute", "home_goals", "away_goals",
//                "home_reds", "away_reds", "home_yellows", "away_yellows"},
//    "actions": [{"actor_id", "team_side", "action_type", "x", "y",
//                 "delta_t", "success", "obv"}, ...]}

inline nlohmann::json to_json(const Action& a) {
  return {{"actor_id", a.actor_id}, {"team_side", to_string(a.team_side)},
          {"action_type", a.action_type}, {"x", a.x}, {"y", a.y},
          {"delta_t", a.delta_t}, {"success", a.success}, {"obv", a.obv}};
}

inline nlohmann::json to_json(const ContextBlock& c) {
  return {{"on_pitch", c.on_pitch},         {"minute", c.minute},
          {"home_goals", c.home_goals},     {"away_goals", c.away_goals},
          {"home_reds", c.home_reds},       {"away_reds", c.away_reds},
          {"home_yellows", c.home_yellows}, {"away_yellows", c.away_yellows}};
}

inline nlohmann::json to_json(const Episode& ep) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& a : ep.actions) actions.push_back(to_json(a));
  return {{"match_id", ep.source_match_id},
          {"start_reason", to_string(ep.start_reason)},
          {"context", to_json(ep.context)},
          {"actions", std::move(actions)}};
}

inline Episode episode_from_json(const nlohmann::json& j) {
  try {
    Episode ep;
    ep.source_match_id = j.at("match_id").get<std::string>();
    ep.start_reason = start_reason_from_string(j.at("start_reason").get<std::string>());
    const auto& c = j.at("context");
    auto ids = c.at("on_pitch").get<std::vector<PlayerId>>();
    if (ids.size() != kPlayersOnPitch) {
      throw Error(Errc::malformed_input, "context must list exactly 22 players");
    }
    std::copy(ids.begin(), ids.end(), ep.context.on_pitch.begin());
    ep.context.minute = c.at("minute").get<int>();
    ep.context.home_goals = c.at("home_goals").get<int>();
    ep.context.away_goals = c.at("away_goals").get<int>();
    ep.context.home_reds = c.at("home_reds").get<int>();
    ep.context.away_reds = c.at("away_reds").get<int>();
    ep.context.home_yellows = c.at("home_yellows").get<int>();
    ep.context.away_yellows = c.at("away_yellows").get<int>();
    for (const auto& ja : j.at("actions")) {
      Action a;
      a.actor_id = ja.at("actor_id").get<PlayerId>();
      a.team_side = team_side_from_string(ja.at("team_side").get<std::string>());
      a.action_type = ja.at("action_type").get<std::string>();
      a.x = ja.at("x").get<double>();
      a.y = ja.at("y").get<double>();
      a.delta_t = ja.at("delta_t").get<double>();
      a.success = ja.at("success").get<bool>();
      a.obv = ja.at("obv").get<double>();
      ep.actions.push_back(std::move(a));
    }
    return ep;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_input, std::string("bad episode record: ") + e.what());
  }
}

inline std::vector<Episode> read_corpus(std::istream& in) {
  std::vector<Episode> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::malformed_input,
                  "corpus line " + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    out.push_back(episode_from_json(j));
  }
  return out;
}

inline std::vector<Episode> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open corpus '" + path + "'");
  return read_corpus(in);
}

inline void write_corpus(std::ostream& out, const std::vector<Episode>& episodes) {
  for (const auto& ep : episodes) out << to_json(ep).dump() << '\n';
}

inline void write_corpus(const std::string& path, const std::vector<Episode>& episodes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write corpus '" + path + "'");
  write_corpus(out, episodes);
}

struct CorpusStats {
  std::size_t match_count = 0;
  std::size_t episode_count = 0;
  double mean_events_per_episode = 0.0;
  std::size_t player_count = 0;
};

inline CorpusStats corpus_stats(const std::vector<Episode>& episodes) {
  CorpusStats s;
  if (episodes.empty()) return s;
  std::set<std::string> matches;
  std::set<PlayerId> players;
  std::size_t events = 0;
  for (const auto& ep : episodes) {
    matches.insert(ep.source_match_id);
    players.insert(ep.context.on_pitch.begin(), ep.context.on_pitch.end());
    events += ep.actions.size();
  }
  s.match_count = matches.size();
  s.episode_count = episodes.size();
  s.mean_events_per_episode = static_cast<double>(events) / static_cast<double>(episodes.size());
  s.player_count = players.size();
  return s;
}

inline nlohmann::json to_json(const CorpusStats& s) {
  return {{"match_count", s.match_count},
          {"episode_count", s.episode_count},
          {"mean_events_per_episode", s.mean_events_per_episode},
          {"player_count", s.player_count}};
}

// Sorted player universe of a corpus (every id listed in a context block).
inline std::vector<PlayerId> player_universe(const std::vector<Episode>& episodes) {
  std::set<PlayerId> ids;
  for (const auto& ep : episodes) ids.insert(ep.context.on_pitch.begin(), ep.context.on_pitch.end());
  return {ids.begin(), ids.end()};
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_CORPUS_HPP_
