#ifndef SCOUTGPT_SERVICE_HPP_
#define SCOUTGPT_SERVICE_HPP_

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "scoutgpt/analytics.hpp"
#include "scoutgpt/checkpoint.hpp"
#include "scoutgpt/corpus.hpp"
#include "scoutgpt/inference.hpp"

// After Eigen: <resolv.h> defines _res, a name Eigen uses internally.
#include <httplib.h>

namespace scoutgpt {

struct PlayerMeta {
  std::optional<std::string> role_label;
  std::optional<RoleClass> role_class;
};

// Reads {"players": [{"player_id", "archetype"?, "role_class"?, "role_label"?}]},
// which the synthetic ground-truth sidecar satisfies.
inline std::map<PlayerId, PlayerMeta> player_meta_from_json(const nlohmann::json& j) {
  std::map<PlayerId, PlayerMeta> out;
  if (!j.contains("players") || !j["players"].is_array()) {
    throw Error(Errc::malformed_input, "player metadata needs a 'players' array");
  }
  for (const auto& p : j["players"]) {
    PlayerMeta m;
    if (p.contains("role_label")) m.role_label = p["role_label"].get<std::string>();
    else if (p.contains("archetype")) m.role_label = p["archetype"].get<std::string>();
    if (p.contains("role_class")) m.role_class = role_from_string(p["role_class"].get<std::string>());
    out[p.at("player_id").get<PlayerId>()] = m;
  }
  return out;
}

struct ServiceConfig {
  int max_samples = 100;
  std::size_t max_episodes = 10;
  EncodeOptions encode{};
  std::map<PlayerId, PlayerMeta> players;
};

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

inline int http_status(Errc code) {
  switch (code) {
    case Errc::unknown_player:
    case Errc::not_found: return 404;
    case Errc::limit: return 422;
    case Errc::vocabulary_mismatch: return 409;
    case Errc::io: return 500;
    default: return 400;
  }
}

inline HttpReply error_reply(int status, std::string_view code, const std::string& message) {
  return {status, {{"code", code}, {"message", message}}};
}

class Service {
 public:
  Service(Checkpoint ck, std::vector<Episode> corpus, ServiceConfig cfg = {})
      : ck_(std::move(ck)), corpus_(std::move(corpus)), cfg_(std::move(cfg)) {
    const std::string corpus_hash = Vocabulary(player_universe(corpus_)).hash();
    if (corpus_hash != ck_.vocab.hash()) {
      throw Error(Errc::vocabulary_mismatch, "corpus vocabulary " + corpus_hash +
                                                 " does not match checkpoint vocabulary " +
                                                 ck_.vocab.hash());
    }
    if (cfg_.encode.block_size > ck_.params.config().block_size) {
      throw Error(Errc::shape, "encode block size exceeds the model's");
    }
    if (cfg_.max_samples < 1) throw Error(Errc::domain, "sample limit must be at least 1");
    model_hash_ = model_hash(ck_.params);
    embeddings_ = player_embeddings(ck_.params, ck_.vocab);
    for (const auto& ep : corpus_) {
      for (const auto& a : ep.actions) ++action_counts_[a.actor_id];
    }
  }

  const Vocabulary& vocab() const { return ck_.vocab; }
  const ModelParams<float>& params() const { return ck_.params; }
  const std::vector<Episode>& corpus() const { return corpus_; }
  const ServiceConfig& config() const { return cfg_; }
  const std::string& model_hash_hex() const { return model_hash_; }

  // Transport-independent dispatch; never throws.
  HttpReply handle(std::string_view method, const std::string& path,
                   const std::multimap<std::string, std::string>& query, const std::string& body) const {
    try {
      return route(method, path, query, body);
    } catch (const Error& e) {
      return error_reply(http_status(e.code()), errc_name(e.code()), e.what());
    } catch (const nlohmann::json::exception& e) {
      return error_reply(400, "malformed_input", e.what());
    } catch (const std::exception& e) {
      return error_reply(500, "internal", e.what());
    }
  }

  void bind(httplib::Server& server) const {
    auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
      std::multimap<std::string, std::string> q(req.params.begin(), req.params.end());
      const HttpReply r = handle(req.method, req.path, q, req.body);
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Get(".*", adapt);
    server.Post(".*", adapt);
    server.Put(".*", adapt);
    server.Delete(".*", adapt);
  }

  // The /simulate response for a parsed request body.
  nlohmann::json simulate(const nlohmann::json& req) const {
    if (!req.is_object()) throw Error(Errc::malformed_input, "request body must be a JSON object");
    Substitution sub{req.at("out_player").get<PlayerId>(), req.at("in_player").get<PlayerId>()};
    for (PlayerId id : {sub.out_player, sub.in_player}) {
      if (!ck_.vocab.has_player(id)) {
        throw Error(Errc::unknown_player, "player " + std::to_string(id) + " is not in the vocabulary");
      }
    }
    SimulationOptions opt;
    opt.encode = cfg_.encode;
    opt.n_samples = req.value("n_samples", 30);
    if (opt.n_samples > cfg_.max_samples) {
      throw Error(Errc::limit, "n_samples " + std::to_string(opt.n_samples) + " exceeds the limit of " +
                                   std::to_string(cfg_.max_samples));
    }
    if (opt.n_samples < 1) throw Error(Errc::domain, "n_samples must be at least 1");
    opt.temperature = req.value("temperature", 1.0);
    opt.seed = req.value("seed", std::uint64_t{1});
    if (req.contains("role_class")) {
      opt.role = role_from_string(req["role_class"].get<std::string>());
    } else if (auto it = cfg_.players.find(sub.in_player); it != cfg_.players.end() && it->second.role_class) {
      opt.role = *it->second.role_class;
    }

    std::vector<std::size_t> ids;
    bool truncated = false;
    if (req.contains("episode_ids")) {
      ids = req["episode_ids"].get<std::vector<std::size_t>>();
      if (ids.empty()) throw Error(Errc::domain, "episode_ids is empty");
      if (ids.size() > cfg_.max_episodes) {
        throw Error(Errc::limit, "at most " + std::to_string(cfg_.max_episodes) + " episodes per request");
      }
      for (auto id : ids) {
        if (id >= corpus_.size()) throw Error(Errc::not_found, "episode " + std::to_string(id) + " does not exist");
      }
    } else {
      for (std::size_t i = 0; i < corpus_.size(); ++i) {
        if (!usable(corpus_[i], sub)) continue;
        if (ids.size() == cfg_.max_episodes) {
          truncated = true;
          break;
        }
        ids.push_back(i);
      }
      if (ids.empty()) {
        throw Error(Errc::not_found, "no episode where player " + std::to_string(sub.out_player) +
                                         " acts and player " + std::to_string(sub.in_player) +
                                         " can come on");
      }
    }
    std::vector<const Episode*> eps;
    for (auto id : ids) eps.push_back(&corpus_[id]);

    const BatchSimulation run = simulate_batch(ck_.params, ck_.vocab, eps, ids, sub, opt);
    const BatchSimulation base =
        sub.in_player == sub.out_player
            ? run
            : simulate_batch(ck_.params, ck_.vocab, eps, ids, {sub.out_player, sub.out_player}, opt);
    nlohmann::json out = to_json(run);
    out["baseline"] = to_json(base.pooled);
    for (std::size_t i = 0; i < base.episodes.size(); ++i) {
      out["episodes"][i]["baseline"] = to_json(base.episodes[i].result);
    }
    out["request"] = {{"out_player", sub.out_player}, {"in_player", sub.in_player},
                      {"n_samples", opt.n_samples},   {"temperature", opt.temperature},
                      {"seed", opt.seed},             {"role_class", to_string(opt.role)},
                      {"episode_ids", ids},           {"episodes_truncated", truncated}};
    return out;
  }

 private:
  // out_player acts inside the encoded window and in_player may replace them.
  bool usable(const Episode& ep, const Substitution& sub) const {
    if (!ep.context.contains(sub.out_player)) return false;
    if (sub.in_player != sub.out_player && ep.context.contains(sub.in_player)) return false;
    const std::size_t n = ep.actions.size();
    const std::size_t first = n - std::min<std::size_t>(n, static_cast<std::size_t>(cfg_.encode.max_events));
    for (std::size_t i = first; i < n; ++i) {
      if (ep.actions[i].actor_id == sub.out_player) return true;
    }
    return false;
  }

  static PlayerId parse_id(const std::string& s) {
    PlayerId v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw Error(Errc::malformed_input, "'" + s + "' is not a player id");
    }
    return v;
  }

  static std::optional<std::string> query_value(const std::multimap<std::string, std::string>& q,
                                                const std::string& key) {
    auto it = q.find(key);
    if (it == q.end()) return std::nullopt;
    return it->second;
  }

  static long query_int(const std::multimap<std::string, std::string>& q, const std::string& key,
                        long fallback) {
    const auto v = query_value(q, key);
    if (!v) return fallback;
    long out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
      throw Error(Errc::malformed_input, "query parameter '" + key + "' must be an integer");
    }
    return out;
  }

  PlayerId known_player(const std::string& s) const {
    const PlayerId id = parse_id(s);
    if (!ck_.vocab.has_player(id)) {
      throw Error(Errc::unknown_player, "player " + std::to_string(id) + " is not in the vocabulary");
    }
    return id;
  }

  nlohmann::json meta_json(PlayerId id) const {
    nlohmann::json j = {{"role_label", nullptr}, {"role_class", nullptr}};
    if (auto it = cfg_.players.find(id); it != cfg_.players.end()) {
      if (it->second.role_label) j["role_label"] = *it->second.role_label;
      if (it->second.role_class) j["role_class"] = to_string(*it->second.role_class);
    }
    return j;
  }

  HttpReply route(std::string_view method, const std::string& path,
                  const std::multimap<std::string, std::string>& query, const std::string& body) const {
    static const std::regex player_route(R"(/players/([^/]+)/(profile|similar|embedding))");
    std::smatch m;
    const bool get = method == "GET";
    if (path == "/health") {
      if (!get) return method_not_allowed();
      return {200, {{"status", "ok"}, {"model_hash", model_hash_}, {"vocab_hash", ck_.vocab.hash()}}};
    }
    if (path == "/players") {
      if (!get) return method_not_allowed();
      nlohmann::json list = nlohmann::json::array();
      for (PlayerId id : ck_.vocab.players()) {
        auto c = action_counts_.find(id);
        nlohmann::json j = {{"player_id", id}, {"n_actions", c == action_counts_.end() ? 0 : c->second}};
        j.update(meta_json(id));
        list.push_back(j);
      }
      return {200, list};
    }
    if (std::regex_match(path, m, player_route)) {
      if (!get) return method_not_allowed();
      const PlayerId id = known_player(m[1].str());
      const std::string what = m[2].str();
      if (what == "profile") {
        nlohmann::json j = {{"player_id", id}, {"profile", to_json(action_profile(corpus_, id))}};
        j.update(meta_json(id));
        return {200, j};
      }
      if (what == "embedding") return {200, {{"player_id", id}, {"embedding", embeddings_.row(id)}}};
      const long k = query_int(query, "k", 10);
      if (k < 1) throw Error(Errc::domain, "k must be at least 1");
      nlohmann::json list = nlohmann::json::array();
      for (const auto& n : similar_players(embeddings_, id, static_cast<int>(std::min<long>(k, 1 << 20)))) {
        nlohmann::json j = {{"player_id", n.player_id}, {"cosine", n.cosine}};
        j.update(meta_json(n.player_id));
        list.push_back(j);
      }
      return {200, list};
    }
    if (path == "/episodes") {
      if (!get) return method_not_allowed();
      std::optional<PlayerId> player;
      if (auto v = query_value(query, "player")) player = known_player(*v);
      const long offset = query_int(query, "offset", 0), limit = query_int(query, "limit", 100);
      if (offset < 0 || limit < 1) throw Error(Errc::domain, "offset must be >= 0 and limit >= 1");
      nlohmann::json list = nlohmann::json::array();
      std::size_t total = 0;
      for (std::size_t i = 0; i < corpus_.size(); ++i) {
        const Episode& ep = corpus_[i];
        std::size_t acts = 0;
        if (player) {
          for (const auto& a : ep.actions) acts += a.actor_id == *player ? 1 : 0;
          if (acts == 0) continue;
        }
        if (total++ < static_cast<std::size_t>(offset) ||
            list.size() >= static_cast<std::size_t>(limit)) {
          continue;
        }
        nlohmann::json j = {{"episode_id", i},
                            {"match_id", ep.source_match_id},
                            {"start_reason", to_string(ep.start_reason)},
                            {"minute", ep.context.minute},
                            {"n_actions", ep.actions.size()},
                            {"on_pitch", ep.context.on_pitch}};
        if (player) j["n_player_actions"] = acts;
        list.push_back(j);
      }
      return {200, {{"total", total}, {"episodes", list}}};
    }
    if (path == "/embedding-map") {
      if (!get) return method_not_allowed();
      const auto proj = project_embeddings(embeddings_, embeddings_.ids);
      nlohmann::json list = nlohmann::json::array();
      for (const auto& pt : proj.points) {
        nlohmann::json j = {{"player_id", pt.player_id}, {"u", pt.u}, {"v", pt.v}};
        j.update(meta_json(pt.player_id));
        list.push_back(j);
      }
      return {200, {{"points", list},
                    {"explained_variance", {proj.variance[0], proj.variance[1]}},
                    {"total_variance", proj.total_variance}}};
    }
    if (path == "/simulate") {
      if (method != "POST") return method_not_allowed();
      nlohmann::json req;
      try {
        req = nlohmann::json::parse(body);
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::malformed_input, std::string("request body is not JSON: ") + e.what());
      }
      return {200, simulate(req)};
    }
    return error_reply(404, "not_found", "no route for " + path);
  }

  static HttpReply method_not_allowed() { return error_reply(405, "method_not_allowed", "method not allowed"); }

  Checkpoint ck_;
  std::vector<Episode> corpus_;
  ServiceConfig cfg_;
  std::string model_hash_;
  EmbeddingTable embeddings_;
  std::map<PlayerId, std::size_t> action_counts_;
};

}  // namespace scoutgpt

#endif  // SCOUTGPT_SERVICE_HPP_
