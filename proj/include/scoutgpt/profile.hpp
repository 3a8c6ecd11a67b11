#ifndef SCOUTGPT_PROFILE_HPP_
#define SCOUTGPT_PROFILE_HPP_

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scoutgpt/domain.hpp"
#include "scoutgpt/error.hpp"

namespace scoutgpt {

enum class ActionFamily { dribble, pass, shot, defensive, other };

inline ActionFamily action_family(std::string_view type) {
  static const std::array<std::string_view, 2> dribble = {"dribble", "take_on"};
  static const std::array<std::string_view, 7> pass = {
      "pass", "cross", "throw_in", "freekick_crossed", "freekick_short", "corner_crossed",
      "corner_short"};
  static const std::array<std::string_view, 3> shot = {"shot", "shot_penalty", "shot_freekick"};
  static const std::array<std::string_view, 8> defensive = {
      "tackle", "interception", "clearance", "keeper_save", "keeper_claim", "keeper_punch",
      "keeper_pick_up", "foul"};
  auto in = [&](const auto& set) {
    for (auto s : set) {
      if (s == type) return true;
    }
    return false;
  };
  if (in(dribble)) return ActionFamily::dribble;
  if (in(pass)) return ActionFamily::pass;
  if (in(shot)) return ActionFamily::shot;
  if (in(defensive)) return ActionFamily::defensive;
  return ActionFamily::other;
}

struct ActionProfile {
  double dribble = 0.0;
  double pass = 0.0;
  double shot = 0.0;
  double defensive = 0.0;
  double other = 0.0;
  double success_rate = 0.0;
  std::size_t n_actions = 0;

  bool operator==(const ActionProfile&) const = default;
};

inline nlohmann::json to_json(const ActionProfile& p) {
  return {{"dribble", p.dribble},     {"pass", p.pass},
          {"shot", p.shot},           {"defensive", p.defensive},
          {"other", p.other},         {"success_rate", p.success_rate},
          {"n_actions", p.n_actions}};
}

// Running counts; finish() turns them into shares.
class ProfileCounter {
 public:
  void add(std::string_view type, bool success) {
    ++counts_[static_cast<std::size_t>(action_family(type))];
    successes_ += success ? 1 : 0;
    ++total_;
  }

  std::size_t total() const { return total_; }

  ActionProfile finish() const {
    if (total_ == 0) throw Error(Errc::domain, "profile needs at least one action");
    const auto n = static_cast<double>(total_);
    ActionProfile p;
    p.dribble = static_cast<double>(counts_[0]) / n;
    p.pass = static_cast<double>(counts_[1]) / n;
    p.shot = static_cast<double>(counts_[2]) / n;
    p.defensive = static_cast<double>(counts_[3]) / n;
    // Remainder, so the shares sum to one.
    p.other = counts_[4] == 0 ? 0.0 : 1.0 - (p.dribble + p.pass + p.shot + p.defensive);
    p.success_rate = static_cast<double>(successes_) / n;
    p.n_actions = total_;
    return p;
  }

 private:
  std::array<std::size_t, 5> counts_{};
  std::size_t successes_ = 0;
  std::size_t total_ = 0;
};

inline ActionProfile action_profile(const std::vector<Episode>& episodes, PlayerId player) {
  ProfileCounter c;
  for (const auto& ep : episodes) {
    for (const auto& a : ep.actions) {
      if (a.actor_id == player) c.add(a.action_type, a.success);
    }
  }
  if (c.total() == 0) {
    throw Error(Errc::not_found, "player " + std::to_string(player) + " has no actions");
  }
  return c.finish();
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_PROFILE_HPP_
