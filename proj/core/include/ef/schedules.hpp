// SPDX-License-Identifier: Apache-2.0
#pragma once

// Learning-rate schedules and the checkpoint epochs they imply.
//
// Rates are indexed by 1-based iteration t; checkpoints by 1-based epoch. An
// epoch ends at iteration epoch * iterations_per_epoch.

#include <cstddef>
#include <variant>
#include <vector>

namespace ef {

struct ConstantSchedule {
  double rate = 1e-3;
  std::size_t total_epochs = 1;
  std::size_t iterations_per_epoch = 1;
};

/// Shifted-cosine restarts: M cycles of ceil(T / M) iterations annealing from
/// alpha0 toward zero, where T = total_epochs * iterations_per_epoch.
struct SnapshotCosineSchedule {
  double alpha0 = 0.1;
  std::size_t total_epochs = 1;
  std::size_t cycles = 1;
  std::size_t iterations_per_epoch = 1;
};

/// Constant alpha1 for the first floor(pretrain_fraction * total_epochs)
/// epochs, then a triangular wave alpha1 -> alpha2 -> alpha1 with a period of
/// cycle_length epochs.
struct FgeSchedule {
  double pretrain_fraction = 0.75;
  double alpha1 = 1e-2;
  double alpha2 = 5e-4;
  std::size_t cycle_length = 4;
  std::size_t total_epochs = 1;
  std::size_t iterations_per_epoch = 1;

  [[nodiscard]] std::size_t pretrain_epochs() const;
};

using ScheduleSpec = std::variant<ConstantSchedule, SnapshotCosineSchedule, FgeSchedule>;

/// Throws std::invalid_argument when an invariant of the variant fails.
void validate(const ScheduleSpec& spec);

[[nodiscard]] std::size_t total_epochs(const ScheduleSpec& spec);
[[nodiscard]] std::size_t iterations_per_epoch(const ScheduleSpec& spec);
/// Number of iterations covered by the schedule.
[[nodiscard]] std::size_t horizon(const ScheduleSpec& spec);
/// Same schedule with a different iterations_per_epoch.
[[nodiscard]] ScheduleSpec with_iterations_per_epoch(ScheduleSpec spec, std::size_t ipe);

/// Learning rate at iteration t in [1, horizon]; throws std::out_of_range otherwise.
[[nodiscard]] double lr_at(const ScheduleSpec& spec, std::size_t t);
/// Strictly increasing epochs at which a checkpoint is taken: the last whole
/// epoch of each cosine cycle, each FGE trough, or the final epoch for a constant rate.
[[nodiscard]] std::vector<std::size_t> checkpoint_epochs(const ScheduleSpec& spec);

}  // namespace ef
