// Command-line front end: synthetic data, training, evaluation, simulation,
// embedding export and the HTTP service.
#include <charconv>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "scoutgpt/scoutgpt.hpp"

namespace fs = std::filesystem;
using namespace scoutgpt;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_input, path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  out << text;
  if (!out) throw Error(Errc::io, "write failed for " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(9) << v;
  return s.str();
}

// Encoding used at training time; falls back to the largest window the model holds.
EncodeOptions encode_options(const Checkpoint& ck) {
  EncodeOptions o;
  o.block_size = ck.params.config().block_size;
  o.max_events = std::min(60, max_events_for(o.block_size));
  if (ck.metadata.contains("encode")) {
    o.block_size = ck.metadata["encode"].value("block_size", o.block_size);
    o.max_events = ck.metadata["encode"].value("max_events", o.max_events);
  }
  return o;
}

void check_players_known(const std::vector<Episode>& episodes, const Vocabulary& vocab) {
  for (PlayerId id : player_universe(episodes)) {
    if (!vocab.has_player(id)) {
      throw Error(Errc::unknown_player, "corpus player " + std::to_string(id) + " is not in the checkpoint vocabulary");
    }
  }
}

std::map<PlayerId, PlayerMeta> load_labels(const std::string& path) {
  if (path.empty()) return {};
  if (fs::path(path).extension() == ".json") return player_meta_from_json(read_json(path));
  // CSV: player_id,role_label[,role_class]
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read " + path);
  std::map<PlayerId, PlayerMeta> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("player_id", 0) == 0)) continue;
    std::stringstream ss(line);
    std::string id, label, role;
    std::getline(ss, id, ',');
    std::getline(ss, label, ',');
    std::getline(ss, role, ',');
    PlayerMeta m;
    if (!label.empty()) m.role_label = label;
    if (!role.empty()) m.role_class = role_from_string(role);
    try {
      out[static_cast<PlayerId>(std::stoll(id))] = m;
    } catch (const std::exception&) {
      throw Error(Errc::malformed_input, path + ":" + std::to_string(lineno) + ": bad player id", lineno);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::uint64_t seed = 1;
  int matches = 200;
  int teams = 4;
  std::string out, truth;
};

int run_synth(const SynthArgs& a) {
  const auto league = synth::make_league(a.seed, a.teams);
  const auto corpus = synth::generate_corpus(league, {.matches = a.matches, .seed = a.seed});
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_corpus(a.out, corpus.episodes);
  const std::string truth = a.truth.empty() ? (out.parent_path() / (out.stem().string() + ".truth.json")).string() : a.truth;
  json gt = synth::ground_truth_json(league);
  gt["corpus"] = {{"matches", a.matches}, {"seed", a.seed}, {"stats", to_json(corpus_stats(corpus.episodes))}};
  write_json(truth, gt);
  std::cerr << "wrote " << corpus.episodes.size() << " episodes to " << a.out << ", ground truth to " << truth << "\n";
  return 0;
}

struct TrainArgs {
  std::string corpus, config, out;
};

int run_train(const TrainArgs& a) {
  const json cfg_json = read_json(a.config);
  const auto episodes = read_corpus(a.corpus);
  const Vocabulary vocab(player_universe(episodes));

  ModelConfig mcfg = cfg_json.value("model", json::object()).get<ModelConfig>();
  mcfg.vocab_size = vocab.size();
  mcfg.validate();
  const TrainConfig tcfg = cfg_json.value("train", json::object()).get<TrainConfig>();
  EncodeOptions enc;
  enc.block_size = mcfg.block_size;
  enc.max_events = std::min(60, max_events_for(mcfg.block_size));
  if (cfg_json.contains("encode")) {
    enc.block_size = cfg_json["encode"].value("block_size", enc.block_size);
    enc.max_events = cfg_json["encode"].value("max_events", enc.max_events);
  }
  const double holdout = cfg_json.value("holdout_fraction", 0.1);

  const auto split = split_by_match(episodes, holdout, tcfg.seed);
  const auto train_set = make_training_set(split.train, vocab, enc);
  const auto held_set = make_training_set(split.heldout, vocab, enc);
  auto params = init_params<float>(mcfg, tcfg.seed);
  std::cerr << "model: " << parameter_count(mcfg) << " parameters, vocab " << vocab.size() << "; "
            << train_set.sequences.size() << " train / " << held_set.sequences.size() << " held-out episodes\n";

  TrainOptions topt;
  if (!held_set.sequences.empty()) topt.heldout = &held_set;
  topt.on_eval = [](const EvalPoint& e, const ModelParams<float>&) {
    std::cerr << "step " << e.step << "  train " << fmt(e.train_loss);
    if (!std::isnan(e.heldout_loss)) std::cerr << "  held-out " << fmt(e.heldout_loss);
    std::cerr << "\n";
  };
  const TrainResult result = train(params, vocab.hash(), train_set, tcfg, topt);

  fs::create_directories(a.out);
  Checkpoint ck{params, vocab, json::object()};
  ck.metadata = {{"encode", {{"block_size", enc.block_size}, {"max_events", enc.max_events}}},
                 {"train", tcfg},
                 {"holdout_fraction", holdout},
                 {"corpus", fs::path(a.corpus).filename().string()},
                 {"steps_done", result.steps_done}};
  save_checkpoint(fs::path(a.out) / "model.ckpt", ck);
  json log = to_json(result);
  log["heldout_matches"] = split.heldout_matches;
  if (!split.heldout.empty()) log["heldout_metrics"] = to_json(evaluate(params, vocab, split.heldout, enc));
  write_json((fs::path(a.out) / "train_log.json").string(), log);
  std::cerr << "saved " << (fs::path(a.out) / "model.ckpt").string() << " (model " << model_hash(params) << ")\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt, corpus, report;
};

int run_evaluate(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const auto episodes = read_corpus(a.corpus);
  check_players_known(episodes, ck.vocab);
  const EncodeOptions enc = encode_options(ck);
  const MetricReport r = evaluate(ck.params, ck.vocab, episodes, enc);
  json j = to_json(r);
  j["model_hash"] = model_hash(ck.params);
  j["vocab_hash"] = ck.vocab.hash();
  j["episodes"] = episodes.size();
  const std::vector<Sequence> seqs = make_training_set(episodes, ck.vocab, enc).sequences;
  j["loss"] = sequence_loss(ck.params, std::span<const Sequence>(seqs));
  write_json(a.report, j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct SimArgs {
  std::string ckpt, episodes, report, pairs, role;
  PlayerId out_player = 0, in_player = 0;
  int n = 30;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  std::size_t max_episodes = 0;  // 0: all usable episodes
};

json simulate_pair(const Checkpoint& ck, const std::vector<Episode>& episodes, const SimArgs& a, Substitution sub,
                   RoleClass role) {
  SimulationOptions opt{.n_samples = a.n, .temperature = a.temperature, .seed = a.seed, .role = role,
                        .encode = encode_options(ck)};
  std::vector<const Episode*> eps;
  std::vector<std::size_t> ids;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const Episode& ep = episodes[i];
    const bool on = ep.context.contains(sub.out_player);
    const bool clash = sub.in_player != sub.out_player && ep.context.contains(sub.in_player);
    const std::size_t first = ep.actions.size() - std::min<std::size_t>(ep.actions.size(), static_cast<std::size_t>(opt.encode.max_events));
    bool acts = false;
    for (std::size_t k = first; k < ep.actions.size(); ++k) acts = acts || ep.actions[k].actor_id == sub.out_player;
    if (!on || clash || !acts) {
      skipped += on ? 1 : 0;
      continue;
    }
    if (a.max_episodes > 0 && eps.size() == a.max_episodes) break;
    eps.push_back(&ep);
    ids.push_back(i);
  }
  if (eps.empty()) {
    throw Error(Errc::not_found, "no episode where player " + std::to_string(sub.out_player) + " acts");
  }
  json j = to_json(simulate_batch(ck.params, ck.vocab, eps, ids, sub, opt));
  j["out_player"] = sub.out_player;
  j["in_player"] = sub.in_player;
  j["role_class"] = to_string(role);
  j["skipped_episodes"] = skipped;
  return j;
}

int run_simulate(const SimArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const auto episodes = read_corpus(a.episodes);
  check_players_known(episodes, ck.vocab);
  const RoleClass default_role = a.role.empty() ? RoleClass::midfielder : role_from_string(a.role);
  json report = {{"model_hash", model_hash(ck.params)}, {"vocab_hash", ck.vocab.hash()},
                 {"n_samples", a.n},                     {"temperature", a.temperature},
                 {"seed", a.seed}};
  if (!a.pairs.empty()) {
    std::ifstream in(a.pairs);
    if (!in) throw Error(Errc::io, "cannot read " + a.pairs);
    json rows = json::array();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || (lineno == 1 && line.rfind("out_player", 0) == 0)) continue;
      std::stringstream ss(line);
      std::string o, i, r;
      std::getline(ss, o, ',');
      std::getline(ss, i, ',');
      std::getline(ss, r, ',');
      Substitution sub;
      try {
        sub = {static_cast<PlayerId>(std::stoll(o)), static_cast<PlayerId>(std::stoll(i))};
      } catch (const std::exception&) {
        throw Error(Errc::malformed_input, a.pairs + ":" + std::to_string(lineno) + ": expected out_player,in_player[,role_class]", lineno);
      }
      rows.push_back(simulate_pair(ck, episodes, a, sub, r.empty() ? default_role : role_from_string(r)));
      std::cerr << "pair " << sub.out_player << " -> " << sub.in_player << ": aggregate "
                << fmt(rows.back()["result"]["aggregate_robv"].get<double>()) << "\n";
    }
    report["pairs"] = rows;
  } else {
    if (a.out_player == 0 || a.in_player == 0) {
      throw Error(Errc::domain, "--out-player and --in-player are required without --pairs");
    }
    report.update(simulate_pair(ck, episodes, a, {a.out_player, a.in_player}, default_role));
    std::cerr << "aggregate rOBV " << fmt(report["result"]["aggregate_robv"].get<double>()) << " over "
              << report["episodes"].size() << " episodes\n";
  }
  write_json(a.report, report);
  return 0;
}

struct EmbedArgs {
  std::string ckpt, out, labels;
  PlayerId player = 0;
  int k = 10;
};

int run_embed_export(const EmbedArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const auto t = player_embeddings(ck.params, ck.vocab);
  std::ostringstream s;
  s << "player_id";
  for (Eigen::Index j = 0; j < t.rows.cols(); ++j) s << ",e" << j;
  s << "\n";
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    s << t.ids[i];
    for (Eigen::Index j = 0; j < t.rows.cols(); ++j) s << "," << fmt(t.rows(static_cast<Eigen::Index>(i), j));
    s << "\n";
  }
  write_text(a.out, s.str());
  return 0;
}

int run_embed_similar(const EmbedArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const auto labels = load_labels(a.labels);
  std::cout << "player_id,cosine,role_label\n";
  for (const auto& n : similar_players(player_embeddings(ck.params, ck.vocab), a.player, a.k)) {
    auto it = labels.find(n.player_id);
    std::cout << n.player_id << "," << fmt(n.cosine) << ","
              << (it != labels.end() && it->second.role_label ? *it->second.role_label : "") << "\n";
  }
  return 0;
}

int run_embed_project(const EmbedArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const auto labels = load_labels(a.labels);
  const auto t = player_embeddings(ck.params, ck.vocab);
  const auto proj = project_embeddings(t, t.ids);
  std::ostringstream s;
  s << "player_id,u,v,role_label\n";
  for (const auto& p : proj.points) {
    auto it = labels.find(p.player_id);
    s << p.player_id << "," << fmt(p.u) << "," << fmt(p.v) << ","
      << (it != labels.end() && it->second.role_label ? *it->second.role_label : "") << "\n";
  }
  write_text(a.out, s.str());
  std::cerr << "top-2 variance share " << fmt((proj.variance[0] + proj.variance[1]) / proj.total_variance) << "\n";
  return 0;
}

struct ServeArgs {
  std::string ckpt, corpus, host = "127.0.0.1", labels;
  int port = 8080;
  int max_samples = 100;
  std::size_t max_episodes = 10;
};

int env_int(const char* name, const std::string& v) {
  int out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size()) {
    throw Error(Errc::malformed_input, std::string(name) + " is not an integer: '" + v + "'");
  }
  return out;
}

httplib::Server* g_server = nullptr;

int run_serve(ServeArgs a, bool port_flag, bool limit_flag) {
  // Environment overrides the defaults; explicit flags win over both.
  if (const char* v = std::getenv("SCOUTGPT_PORT"); v && !port_flag) a.port = env_int("SCOUTGPT_PORT", v);
  if (const char* v = std::getenv("SCOUTGPT_MAX_SAMPLES"); v && !limit_flag) {
    a.max_samples = env_int("SCOUTGPT_MAX_SAMPLES", v);
  }
  Checkpoint ck = load_checkpoint(a.ckpt);
  ServiceConfig cfg;
  cfg.encode = encode_options(ck);
  cfg.max_samples = a.max_samples;
  cfg.max_episodes = a.max_episodes;
  cfg.players = load_labels(a.labels);
  const Service service(std::move(ck), read_corpus(a.corpus), cfg);
  httplib::Server server;
  service.bind(server);
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  std::cerr << "serving on http://" << a.host << ":" << a.port << " (model " << service.model_hash_hex()
            << ", sample limit " << cfg.max_samples << ")\n";
  if (!server.listen(a.host, a.port)) throw Error(Errc::io, "cannot listen on " + a.host + ":" + std::to_string(a.port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Player-conditioned next-event model for football event streams"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Synthetic league data");
  synth_cmd->require_subcommand(1);
  auto* gen = synth_cmd->add_subcommand("generate", "Generate a synthetic corpus and its ground truth");
  gen->add_option("--seed", synth_args.seed, "League and match seed");
  gen->add_option("--matches", synth_args.matches, "Number of matches")->check(CLI::PositiveNumber);
  gen->add_option("--teams", synth_args.teams, "Teams in the league")->check(CLI::Range(2, 64));
  gen->add_option("--out", synth_args.out, "Output corpus (NDJSON)")->required();
  gen->add_option("--truth", synth_args.truth, "Ground-truth JSON (default: <out stem>.truth.json)");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  train_cmd->add_option("--corpus", train_args.corpus)->required();
  train_cmd->add_option("--config", train_args.config, "JSON with model, train, encode, holdout_fraction")->required();
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Teacher-forced metrics on a corpus");
  eval_cmd->add_option("--ckpt", eval_args.ckpt)->required();
  eval_cmd->add_option("--corpus", eval_args.corpus)->required();
  eval_cmd->add_option("--report", eval_args.report)->required();

  SimArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Counterfactual substitution rollouts");
  sim_cmd->add_option("--ckpt", sim_args.ckpt)->required();
  sim_cmd->add_option("--episodes", sim_args.episodes, "Episodes (NDJSON)")->required();
  sim_cmd->add_option("--out-player", sim_args.out_player);
  sim_cmd->add_option("--in-player", sim_args.in_player);
  sim_cmd->add_option("--pairs", sim_args.pairs, "CSV of out_player,in_player[,role_class]");
  sim_cmd->add_option("--n", sim_args.n, "Rollouts per episode")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--temperature", sim_args.temperature)->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--seed", sim_args.seed);
  sim_cmd->add_option("--role", sim_args.role, "attacker|midfielder|defender|keeper");
  sim_cmd->add_option("--max-episodes", sim_args.max_episodes, "Cap on episodes per pair (0: all)");
  sim_cmd->add_option("--report", sim_args.report)->required();

  EmbedArgs embed_args;
  auto* embed_cmd = app.add_subcommand("embed", "Player embedding tools");
  embed_cmd->require_subcommand(1);
  auto* exp = embed_cmd->add_subcommand("export", "Write player embeddings as CSV");
  exp->add_option("--ckpt", embed_args.ckpt)->required();
  exp->add_option("--out", embed_args.out)->required();
  auto* sim = embed_cmd->add_subcommand("similar", "Nearest players by cosine similarity");
  sim->add_option("--ckpt", embed_args.ckpt)->required();
  sim->add_option("--player", embed_args.player)->required();
  sim->add_option("--k", embed_args.k)->check(CLI::PositiveNumber);
  sim->add_option("--labels", embed_args.labels, "Player labels (ground-truth JSON or CSV)");
  auto* proj = embed_cmd->add_subcommand("project", "2-D principal-component map as CSV");
  proj->add_option("--ckpt", embed_args.ckpt)->required();
  proj->add_option("--out", embed_args.out)->required();
  proj->add_option("--labels", embed_args.labels, "Player labels (ground-truth JSON or CSV)");

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP JSON service");
  serve_cmd->add_option("--ckpt", serve_args.ckpt)->required();
  serve_cmd->add_option("--corpus", serve_args.corpus)->required();
  auto* port_opt = serve_cmd->add_option("--port", serve_args.port, "Port (env SCOUTGPT_PORT)");
  serve_cmd->add_option("--host", serve_args.host);
  auto* limit_opt = serve_cmd->add_option("--max-samples", serve_args.max_samples, "Sample limit (env SCOUTGPT_MAX_SAMPLES)");
  serve_cmd->add_option("--max-episodes", serve_args.max_episodes);
  serve_cmd->add_option("--labels", serve_args.labels, "Player labels (ground-truth JSON or CSV)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_synth(synth_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (eval_cmd->parsed()) return run_evaluate(eval_args);
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (exp->parsed()) return run_embed_export(embed_args);
    if (sim->parsed()) return run_embed_similar(embed_args);
    if (proj->parsed()) return run_embed_project(embed_args);
    if (serve_cmd->parsed()) return run_serve(serve_args, port_opt->count() > 0, limit_opt->count() > 0);
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
