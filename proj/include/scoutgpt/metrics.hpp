#ifndef SCOUTGPT_METRICS_HPP_
#define SCOUTGPT_METRICS_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "scoutgpt/discretize.hpp"
#include "scoutgpt/error.hpp"
#include "scoutgpt/vocabulary.hpp"

namespace scoutgpt {

struct MetricReport {
  double acc_team = 0.0;
  double acc_type = 0.0;
  double acc_success = 0.0;
  double mae_x = 0.0;      // meters
  double mae_y = 0.0;      // meters
  double mae_delta = 0.0;  // seconds
  double mae_robv = 0.0;   // value units
  std::size_t n_events_evaluated = 0;

  bool operator==(const MetricReport&) const = default;
};

inline nlohmann::json to_json(const MetricReport& r) {
  return {{"acc_team", r.acc_team},   {"acc_type", r.acc_type},   {"acc_success", r.acc_success},
          {"mae_x", r.mae_x},         {"mae_y", r.mae_y},         {"mae_delta", r.mae_delta},
          {"mae_robv", r.mae_robv},   {"n_events_evaluated", r.n_events_evaluated}};
}

// One scored attribute slot: the block it belongs to, the model's in-block
// choice and the ground truth.
struct SlotPrediction {
  Block kind = Block::special;
  Token predicted = 0;
  Token target = 0;
};

inline double bin_center(const Vocabulary& vocab, Block kind, Token t) {
  const auto [block, value] = vocab.decode(t);
  if (block != kind) throw Error(Errc::grammar_violation, "token outside slot block");
  switch (kind) {
    case Block::x: return undiscretize(Attribute::x, value);
    case Block::y: return undiscretize(Attribute::y, value);
    case Block::delta_t: return undiscretize(Attribute::delta_t, value);
    case Block::robv: return undiscretize(Attribute::robv, value);
    default: throw Error(Errc::domain, "block has no continuous value");
  }
}

// Accuracies over categorical slots, MAEs on bin centers for continuous ones.
// Events are counted by their action-type slot.
inline MetricReport score_predictions(const Vocabulary& vocab, std::span<const SlotPrediction> preds) {
  double hit[3] = {0, 0, 0}, seen[3] = {0, 0, 0};
  double err[4] = {0, 0, 0, 0}, num[4] = {0, 0, 0, 0};
  for (const auto& p : preds) {
    if (!vocab.in_block(p.predicted, p.kind) || !vocab.in_block(p.target, p.kind)) {
      throw Error(Errc::grammar_violation, "prediction or target outside its slot block");
    }
    int cat = -1, cont = -1;
    switch (p.kind) {
      case Block::team: cat = 0; break;
      case Block::action_type: cat = 1; break;
      case Block::success: cat = 2; break;
      case Block::x: cont = 0; break;
      case Block::y: cont = 1; break;
      case Block::delta_t: cont = 2; break;
      case Block::robv: cont = 3; break;
      default: throw Error(Errc::domain, "slot kind is not an event attribute");
    }
    if (cat >= 0) {
      seen[cat] += 1;
      hit[cat] += p.predicted == p.target ? 1 : 0;
    } else {
      num[cont] += 1;
      err[cont] += std::abs(bin_center(vocab, p.kind, p.predicted) - bin_center(vocab, p.kind, p.target));
    }
  }
  if (seen[1] == 0) throw Error(Errc::degenerate_batch, "no events to evaluate");
  auto ratio = [](double a, double b) { return b > 0 ? a / b : 0.0; };
  MetricReport r;
  r.acc_team = ratio(hit[0], seen[0]);
  r.acc_type = ratio(hit[1], seen[1]);
  r.acc_success = ratio(hit[2], seen[2]);
  r.mae_x = ratio(err[0], num[0]);
  r.mae_y = ratio(err[1], num[1]);
  r.mae_delta = ratio(err[2], num[2]);
  r.mae_robv = ratio(err[3], num[3]);
  r.n_events_evaluated = static_cast<std::size_t>(seen[1]);
  return r;
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_METRICS_HPP_
