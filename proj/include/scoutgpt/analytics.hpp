#ifndef SCOUTGPT_ANALYTICS_HPP_
#define SCOUTGPT_ANALYTICS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "scoutgpt/domain.hpp"
#include "scoutgpt/error.hpp"
#include "scoutgpt/model.hpp"
#include "scoutgpt/profile.hpp"
#include "scoutgpt/vocabulary.hpp"

namespace scoutgpt {

// Player rows of the shared embedding, in vocabulary order.
struct EmbeddingTable {
  std::vector<PlayerId> ids;
  Eigen::MatrixXd rows;  // ids.size() x D

  std::size_t index_of(PlayerId id) const {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw Error(Errc::unknown_player, "player " + std::to_string(id) + " has no embedding");
    return static_cast<std::size_t>(it - ids.begin());
  }
  std::vector<double> row(PlayerId id) const {
    const auto r = rows.row(static_cast<Eigen::Index>(index_of(id)));
    return {r.begin(), r.end()};
  }
};

template <typename S>
EmbeddingTable player_embeddings(const ModelParams<S>& p, const Vocabulary& vocab) {
  if (p.config().vocab_size != vocab.size()) {
    throw Error(Errc::vocabulary_mismatch, "model and vocabulary sizes differ");
  }
  EmbeddingTable t;
  t.ids = vocab.players();
  t.rows.resize(static_cast<Eigen::Index>(t.ids.size()), p.config().embed_dim);
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    const auto e = p.token_embedding().row(vocab.player_token(t.ids[i]));
    t.rows.row(static_cast<Eigen::Index>(i)) = e.template cast<double>();
  }
  return t;
}

struct Neighbor {
  PlayerId player_id = 0;
  double cosine = 0.0;

  bool operator==(const Neighbor&) const = default;
};

// Zero rows have cosine 0 with everything.
inline double cosine(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                     const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

inline std::vector<Neighbor> similar_players(const EmbeddingTable& t, PlayerId query, int k) {
  if (k < 1) throw Error(Errc::domain, "k must be at least 1");
  const auto q = static_cast<Eigen::Index>(t.index_of(query));
  std::vector<Neighbor> all;
  all.reserve(t.ids.size());
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    if (static_cast<Eigen::Index>(i) == q) continue;
    all.push_back({t.ids[i], cosine(t.rows.row(q), t.rows.row(static_cast<Eigen::Index>(i)))});
  }
  const auto n = std::min(all.size(), static_cast<std::size_t>(k));
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      return a.cosine != b.cosine ? a.cosine > b.cosine : a.player_id < b.player_id;
                    });
  all.resize(n);
  return all;
}

// Mean over queries of P(cos to a same-label player > cos to another-label player),
// ties counting one half. Queries without both kinds of partner are skipped.
inline double retrieval_auc(const EmbeddingTable& t, const std::map<PlayerId, int>& labels) {
  double sum = 0.0;
  int queries = 0;
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    auto li = labels.find(t.ids[i]);
    if (li == labels.end()) continue;
    std::vector<double> same, other;
    for (std::size_t j = 0; j < t.ids.size(); ++j) {
      auto lj = labels.find(t.ids[j]);
      if (j == i || lj == labels.end()) continue;
      const double c = cosine(t.rows.row(static_cast<Eigen::Index>(i)), t.rows.row(static_cast<Eigen::Index>(j)));
      (lj->second == li->second ? same : other).push_back(c);
    }
    if (same.empty() || other.empty()) continue;
    double wins = 0.0;
    for (double s : same) {
      for (double o : other) wins += s > o ? 1.0 : (s == o ? 0.5 : 0.0);
    }
    sum += wins / (static_cast<double>(same.size()) * static_cast<double>(other.size()));
    ++queries;
  }
  if (queries == 0) throw Error(Errc::domain, "no query has both same- and cross-label partners");
  return sum / queries;
}

struct ProjectedPoint {
  PlayerId player_id = 0;
  double u = 0.0;
  double v = 0.0;
};

struct Projection {
  std::vector<ProjectedPoint> points;
  std::array<Eigen::VectorXd, 2> axes;  // unit principal directions
  std::array<double, 2> variance{};     // eigenvalues of the top-2 directions
  double total_variance = 0.0;          // trace of the covariance
};

// Top-2 principal components of the centered rows. Each axis is flipped so its
// largest-magnitude coordinate is positive.
inline Projection project_embeddings(const EmbeddingTable& t, const std::vector<PlayerId>& ids) {
  if (ids.size() < 3) throw Error(Errc::domain, "projection needs at least 3 players");
  const auto n = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd x(n, t.rows.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = t.rows.row(static_cast<Eigen::Index>(t.index_of(ids[static_cast<std::size_t>(i)])));
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw Error(Errc::domain, "eigendecomposition failed");

  Projection out;
  out.total_variance = cov.trace();
  const Eigen::Index d = cov.cols();
  for (int c = 0; c < 2; ++c) {
    const Eigen::Index col = d - 1 - c;  // eigenvalues come sorted ascending
    if (col < 0) {
      out.axes[static_cast<std::size_t>(c)] = Eigen::VectorXd::Zero(d);
      continue;
    }
    Eigen::VectorXd axis = es.eigenvectors().col(col);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis[arg] < 0) axis = -axis;
    out.axes[static_cast<std::size_t>(c)] = axis;
    out.variance[static_cast<std::size_t>(c)] = std::max(0.0, es.eigenvalues()[col]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    out.points.push_back({ids[static_cast<std::size_t>(i)], x.row(i).dot(out.axes[0]),
                          x.row(i).dot(out.axes[1])});
  }
  return out;
}

struct PlayerCard {
  PlayerId player_id = 0;
  std::vector<double> embedding;
  std::optional<ActionProfile> profile;  // absent when the player never acts in the corpus
  std::optional<std::string> role_label;
};

inline nlohmann::json to_json(const PlayerCard& c) {
  nlohmann::json j = {{"player_id", c.player_id}, {"embedding", c.embedding}};
  j["profile"] = c.profile ? to_json(*c.profile) : nlohmann::json(nullptr);
  j["role_label"] = c.role_label ? nlohmann::json(*c.role_label) : nlohmann::json(nullptr);
  return j;
}

inline PlayerCard player_card(const EmbeddingTable& t, const std::vector<Episode>& episodes, PlayerId id,
                              std::optional<std::string> role_label = std::nullopt) {
  PlayerCard c;
  c.player_id = id;
  c.embedding = t.row(id);
  ProfileCounter counter;
  for (const auto& ep : episodes) {
    for (const auto& a : ep.actions) {
      if (a.actor_id == id) counter.add(a.action_type, a.success);
    }
  }
  if (counter.total() > 0) c.profile = counter.finish();
  c.role_label = std::move(role_label);
  return c;
}

}  // namespace scoutgpt

#endif  // SCOUTGPT_ANALYTICS_HPP_
