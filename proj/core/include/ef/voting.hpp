// SPDX-License-Identifier: Apache-2.0
#pragma once

// Preferential voting over ranked ballots.
//
// Tie convention, used by every rule in this header: among tied candidates the
// lowest index wins. STV eliminates the highest index among the weakest.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ef::voting {

using Candidate = std::size_t;

/// Distinct candidates, most preferred first. May be truncated (used by STV only).
class Ballot {
 public:
  Ballot() = default;
  explicit Ballot(std::vector<Candidate> ranking) : ranking_(std::move(ranking)) {}

  [[nodiscard]] const std::vector<Candidate>& ranking() const noexcept { return ranking_; }
  [[nodiscard]] std::size_t size() const noexcept { return ranking_.size(); }
  [[nodiscard]] Candidate operator[](std::size_t i) const noexcept { return ranking_[i]; }

  friend bool operator==(const Ballot&, const Ballot&) = default;

 private:
  std::vector<Candidate> ranking_;
};

struct WeightedBallot {
  Ballot ballot;
  std::size_t multiplicity = 1;
};

class PreferenceProfile {
 public:
  explicit PreferenceProfile(std::size_t candidate_count);

  /// Throws std::invalid_argument on duplicates, out-of-range candidates or
  /// zero multiplicity.
  void add(Ballot ballot, std::size_t multiplicity = 1);

  [[nodiscard]] std::size_t candidate_count() const noexcept { return candidates_; }
  [[nodiscard]] std::size_t total_voters() const noexcept { return voters_; }
  [[nodiscard]] const std::vector<WeightedBallot>& ballots() const noexcept { return ballots_; }
  [[nodiscard]] bool empty() const noexcept { return ballots_.empty(); }
  /// True when every ballot ranks all candidates.
  [[nodiscard]] bool complete() const noexcept;

  /// The same electorate with candidate c renamed to relabel[c].
  [[nodiscard]] PreferenceProfile relabeled(std::span<const Candidate> relabel) const;
  /// The profile restricted to `keep` (candidate indices renumbered in `keep` order).
  [[nodiscard]] PreferenceProfile restricted(std::span<const Candidate> keep) const;

 private:
  std::size_t candidates_;
  std::size_t voters_ = 0;
  std::vector<WeightedBallot> ballots_;
};

/// Net pairwise margins: at(i, j) = #(i over j) - #(j over i). Antisymmetric.
class PreferenceMatrix {
 public:
  explicit PreferenceMatrix(std::size_t candidate_count);

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] std::int64_t at(Candidate i, Candidate j) const noexcept { return margins_[i * n_ + j]; }
  /// Sets at(i, j) = margin and at(j, i) = -margin.
  void set_margin(Candidate i, Candidate j, std::int64_t margin);

  friend bool operator==(const PreferenceMatrix&, const PreferenceMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::int64_t> margins_;
};

/// Nonincreasing, nonnegative score per rank position.
class WeightVector {
 public:
  explicit WeightVector(std::vector<double> weights);

  static WeightVector plurality(std::size_t n);
  /// k-Borda: [n, n-1, ..., 1].
  static WeightVector borda(std::size_t n);
  /// Classic Borda: [n-1, ..., 0]. Same winner as borda().
  static WeightVector classic_borda(std::size_t n);
  /// Dowdall: [1, 1/2, 1/3, ...].
  static WeightVector dowdall(std::size_t n);

  [[nodiscard]] std::span<const double> values() const noexcept { return w_; }
  [[nodiscard]] std::size_t size() const noexcept { return w_.size(); }

 private:
  std::vector<double> w_;
};

[[nodiscard]] std::vector<double> positional_tally(const PreferenceProfile& profile,
                                                   const WeightVector& weights);
[[nodiscard]] PreferenceMatrix preference_matrix(const PreferenceProfile& profile);
[[nodiscard]] std::optional<Candidate> condorcet_winner(const PreferenceMatrix& matrix);
/// Pairwise victories minus pairwise defeats.
[[nodiscard]] std::vector<int> copeland(const PreferenceMatrix& matrix);
/// Simpson-Kramer: the worst margin of each candidate's row.
[[nodiscard]] std::vector<std::int64_t> minimax(const PreferenceMatrix& matrix);
/// Single-winner STV with whole-ballot transfers.
[[nodiscard]] Candidate stv(const PreferenceProfile& profile);

enum class Rule { plurality, borda, classic_borda, dowdall, minimax, stv, copeland };

[[nodiscard]] std::string_view to_string(Rule rule) noexcept;
/// Accepts the names printed by to_string; throws std::invalid_argument otherwise.
[[nodiscard]] Rule parse_rule(std::string_view name);
[[nodiscard]] std::span<const Rule> all_rules() noexcept;

/// Winner under `rule`; lowest index on ties.
[[nodiscard]] Candidate elect(const PreferenceProfile& profile, Rule rule);

template <typename Score>
[[nodiscard]] Candidate argmax_lowest(std::span<const Score> scores) {
  Candidate best = 0;
  for (Candidate c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return best;
}

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Ballot of a voter at `voter` ranking candidates by ascending Euclidean
/// distance (lower index first on equal distance).
[[nodiscard]] Ballot distance_ballot(Point voter, std::span<const Point> candidates);

/// Monte Carlo of elections in the unit square. Trial k draws from the
/// stream derive_seed(seed, k): voters first, then candidates. Results are in
/// trial order for any worker count.
[[nodiscard]] std::vector<Point> spatial_election(std::size_t voters, std::size_t candidates,
                                                  Rule rule, std::size_t trials,
                                                  std::uint64_t seed, std::size_t workers = 1);

}  // namespace ef::voting
