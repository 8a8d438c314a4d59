// SPDX-License-Identifier: Apache-2.0
#include "ef/voting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ef/parallel.hpp"
#include "ef/rng.hpp"

namespace ef::voting {
namespace {

void require_complete(const PreferenceProfile& profile, const char* what) {
  if (!profile.complete()) {
    throw std::invalid_argument(std::string(what) + ": every ballot must rank all candidates");
  }
}

// positions[c] = rank of candidate c on the ballot.
void fill_positions(const Ballot& ballot, std::vector<std::size_t>& positions) {
  for (std::size_t r = 0; r < ballot.size(); ++r) positions[ballot[r]] = r;
}

constexpr std::array kRules{Rule::plurality, Rule::borda, Rule::classic_borda, Rule::dowdall,
                            Rule::minimax,   Rule::stv,   Rule::copeland};

}  // namespace

PreferenceProfile::PreferenceProfile(std::size_t candidate_count) : candidates_(candidate_count) {
  if (candidate_count == 0) throw std::invalid_argument("PreferenceProfile: need at least one candidate");
}

void PreferenceProfile::add(Ballot ballot, std::size_t multiplicity) {
  if (multiplicity == 0) throw std::invalid_argument("PreferenceProfile: multiplicity must be >= 1");
  if (ballot.size() == 0) throw std::invalid_argument("PreferenceProfile: empty ballot");
  std::vector<bool> seen(candidates_, false);
  for (Candidate c : ballot.ranking()) {
    if (c >= candidates_) throw std::invalid_argument("PreferenceProfile: candidate index out of range");
    if (seen[c]) throw std::invalid_argument("PreferenceProfile: duplicate candidate in ballot");
    seen[c] = true;
  }
  voters_ += multiplicity;
  ballots_.push_back({std::move(ballot), multiplicity});
}

bool PreferenceProfile::complete() const noexcept {
  return std::all_of(ballots_.begin(), ballots_.end(),
                     [&](const WeightedBallot& b) { return b.ballot.size() == candidates_; });
}

PreferenceProfile PreferenceProfile::relabeled(std::span<const Candidate> relabel) const {
  if (relabel.size() != candidates_) throw std::invalid_argument("relabeled: permutation size mismatch");
  std::vector<bool> seen(candidates_, false);
  for (Candidate c : relabel) {
    if (c >= candidates_ || seen[c]) throw std::invalid_argument("relabeled: not a permutation");
    seen[c] = true;
  }
  PreferenceProfile out(candidates_);
  for (const auto& wb : ballots_) {
    std::vector<Candidate> ranking;
    ranking.reserve(wb.ballot.size());
    for (Candidate c : wb.ballot.ranking()) ranking.push_back(relabel[c]);
    out.add(Ballot(std::move(ranking)), wb.multiplicity);
  }
  return out;
}

PreferenceProfile PreferenceProfile::restricted(std::span<const Candidate> keep) const {
  constexpr auto kDropped = std::numeric_limits<Candidate>::max();
  std::vector<Candidate> renumber(candidates_, kDropped);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] >= candidates_ || renumber[keep[i]] != kDropped) {
      throw std::invalid_argument("restricted: invalid candidate list");
    }
    renumber[keep[i]] = i;
  }
  PreferenceProfile out(keep.size());
  for (const auto& wb : ballots_) {
    std::vector<Candidate> ranking;
    for (Candidate c : wb.ballot.ranking()) {
      if (renumber[c] != kDropped) ranking.push_back(renumber[c]);
    }
    if (!ranking.empty()) out.add(Ballot(std::move(ranking)), wb.multiplicity);
  }
  return out;
}

PreferenceMatrix::PreferenceMatrix(std::size_t candidate_count)
    : n_(candidate_count), margins_(candidate_count * candidate_count, 0) {}

void PreferenceMatrix::set_margin(Candidate i, Candidate j, std::int64_t margin) {
  if (i >= n_ || j >= n_) throw std::out_of_range("PreferenceMatrix: index out of range");
  if (i == j) {
    if (margin != 0) throw std::invalid_argument("PreferenceMatrix: diagonal must be zero");
    return;
  }
  margins_[i * n_ + j] = margin;
  margins_[j * n_ + i] = -margin;
}

WeightVector::WeightVector(std::vector<double> weights) : w_(std::move(weights)) {
  for (std::size_t k = 0; k < w_.size(); ++k) {
    if (!std::isfinite(w_[k]) || w_[k] < 0.0) throw std::invalid_argument("WeightVector: weights must be finite and >= 0");
    if (k > 0 && w_[k] > w_[k - 1]) throw std::invalid_argument("WeightVector: weights must be nonincreasing");
  }
}

WeightVector WeightVector::plurality(std::size_t n) {
  std::vector<double> w(n, 0.0);
  if (n > 0) w[0] = 1.0;
  return WeightVector(std::move(w));
}

WeightVector WeightVector::borda(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = static_cast<double>(n - k);
  return WeightVector(std::move(w));
}

WeightVector WeightVector::classic_borda(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = static_cast<double>(n - 1 - k);
  return WeightVector(std::move(w));
}

WeightVector WeightVector::dowdall(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = 1.0 / static_cast<double>(k + 1);
  return WeightVector(std::move(w));
}

std::vector<double> positional_tally(const PreferenceProfile& profile, const WeightVector& weights) {
  require_complete(profile, "positional_tally");
  if (weights.size() != profile.candidate_count()) {
    throw std::invalid_argument("positional_tally: weight vector length must equal the candidate count");
  }
  const auto w = weights.values();
  std::vector<double> scores(profile.candidate_count(), 0.0);
  for (const auto& wb : profile.ballots()) {
    const auto m = static_cast<double>(wb.multiplicity);
    for (std::size_t r = 0; r < wb.ballot.size(); ++r) scores[wb.ballot[r]] += m * w[r];
  }
  return scores;
}

PreferenceMatrix preference_matrix(const PreferenceProfile& profile) {
  require_complete(profile, "preference_matrix");
  const std::size_t n = profile.candidate_count();
  std::vector<std::int64_t> margin(n * n, 0);
  std::vector<std::size_t> pos(n);
  for (const auto& wb : profile.ballots()) {
    fill_positions(wb.ballot, pos);
    const auto m = static_cast<std::int64_t>(wb.multiplicity);
    for (Candidate i = 0; i < n; ++i) {
      for (Candidate j = i + 1; j < n; ++j) margin[i * n + j] += pos[i] < pos[j] ? m : -m;
    }
  }
  PreferenceMatrix out(n);
  for (Candidate i = 0; i < n; ++i) {
    for (Candidate j = i + 1; j < n; ++j) out.set_margin(i, j, margin[i * n + j]);
  }
  return out;
}

std::optional<Candidate> condorcet_winner(const PreferenceMatrix& matrix) {
  const std::size_t n = matrix.size();
  for (Candidate i = 0; i < n; ++i) {
    bool beats_all = true;
    for (Candidate j = 0; j < n && beats_all; ++j) {
      if (j != i && matrix.at(i, j) <= 0) beats_all = false;
    }
    if (beats_all) return i;
  }
  return std::nullopt;
}

std::vector<int> copeland(const PreferenceMatrix& matrix) {
  const std::size_t n = matrix.size();
  std::vector<int> scores(n, 0);
  for (Candidate i = 0; i < n; ++i) {
    for (Candidate j = 0; j < n; ++j) {
      if (matrix.at(i, j) > 0) ++scores[i];
      if (matrix.at(i, j) < 0) --scores[i];
    }
  }
  return scores;
}

std::vector<std::int64_t> minimax(const PreferenceMatrix& matrix) {
  const std::size_t n = matrix.size();
  std::vector<std::int64_t> scores(n, 0);
  if (n < 2) return scores;
  for (Candidate i = 0; i < n; ++i) {
    std::int64_t worst = std::numeric_limits<std::int64_t>::max();
    for (Candidate j = 0; j < n; ++j) {
      if (j != i) worst = std::min(worst, matrix.at(i, j));
    }
    scores[i] = worst;
  }
  return scores;
}

Candidate stv(const PreferenceProfile& profile) {
  if (profile.empty()) throw std::invalid_argument("stv: empty profile");
  const std::size_t n = profile.candidate_count();
  const std::size_t threshold = profile.total_voters() / 2 + 1;
  std::vector<bool> active(n, true);
  std::size_t remaining = n;
  std::vector<std::size_t> counts(n);
  for (;;) {
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& wb : profile.ballots()) {
      for (Candidate c : wb.ballot.ranking()) {
        if (active[c]) {
          counts[c] += wb.multiplicity;
          break;
        }
      }
    }
    Candidate leader = n;
    for (Candidate c = 0; c < n; ++c) {
      if (active[c] && (leader == n || counts[c] > counts[leader])) leader = c;
    }
    if (counts[leader] >= threshold || remaining == 1) return leader;
    Candidate weakest = n;
    for (Candidate c = 0; c < n; ++c) {
      if (active[c] && (weakest == n || counts[c] <= counts[weakest])) weakest = c;
    }
    active[weakest] = false;
    --remaining;
  }
}

std::string_view to_string(Rule rule) noexcept {
  switch (rule) {
    case Rule::plurality: return "plurality";
    case Rule::borda: return "borda";
    case Rule::classic_borda: return "classic_borda";
    case Rule::dowdall: return "dowdall";
    case Rule::minimax: return "minimax";
    case Rule::stv: return "stv";
    case Rule::copeland: return "copeland";
  }
  return "unknown";
}

Rule parse_rule(std::string_view name) {
  for (Rule r : kRules) {
    if (to_string(r) == name) return r;
  }
  throw std::invalid_argument("unknown voting rule '" + std::string(name) + "'");
}

std::span<const Rule> all_rules() noexcept { return kRules; }

Candidate elect(const PreferenceProfile& profile, Rule rule) {
  if (profile.empty()) throw std::invalid_argument("elect: empty profile");
  const std::size_t n = profile.candidate_count();
  switch (rule) {
    case Rule::plurality:
      return argmax_lowest<double>(positional_tally(profile, WeightVector::plurality(n)));
    case Rule::borda:
      return argmax_lowest<double>(positional_tally(profile, WeightVector::borda(n)));
    case Rule::classic_borda:
      return argmax_lowest<double>(positional_tally(profile, WeightVector::classic_borda(n)));
    case Rule::dowdall:
      return argmax_lowest<double>(positional_tally(profile, WeightVector::dowdall(n)));
    case Rule::minimax:
      return argmax_lowest<std::int64_t>(minimax(preference_matrix(profile)));
    case Rule::copeland:
      return argmax_lowest<int>(copeland(preference_matrix(profile)));
    case Rule::stv:
      return stv(profile);
  }
  throw std::invalid_argument("elect: invalid rule");
}

Ballot distance_ballot(Point voter, std::span<const Point> candidates) {
  std::vector<double> dist(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    dist[c] = std::hypot(candidates[c].x - voter.x, candidates[c].y - voter.y);
  }
  std::vector<Candidate> order(candidates.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](Candidate a, Candidate b) { return dist[a] < dist[b]; });
  return Ballot(std::move(order));
}

std::vector<Point> spatial_election(std::size_t voters, std::size_t candidates, Rule rule,
                                    std::size_t trials, std::uint64_t seed, std::size_t workers) {
  if (candidates < 2) throw std::invalid_argument("spatial_election: need at least two candidates");
  if (voters < 1) throw std::invalid_argument("spatial_election: need at least one voter");
  if (trials < 1) throw std::invalid_argument("spatial_election: need at least one trial");
  if (std::find(kRules.begin(), kRules.end(), rule) == kRules.end()) {
    throw std::invalid_argument("spatial_election: invalid rule");
  }
  return parallel_map(trials, workers, [&](std::size_t k) {
    Xoshiro256 rng(derive_seed(seed, k));
    std::vector<Point> voter_pos(voters);
    for (auto& p : voter_pos) {
      p.x = rng.uniform();
      p.y = rng.uniform();
    }
    std::vector<Point> cand_pos(candidates);
    for (auto& p : cand_pos) {
      p.x = rng.uniform();
      p.y = rng.uniform();
    }
    PreferenceProfile profile(candidates);
    for (const auto& v : voter_pos) profile.add(distance_ballot(v, cand_pos));
    return cand_pos[elect(profile, rule)];
  });
}

}  // namespace ef::voting
