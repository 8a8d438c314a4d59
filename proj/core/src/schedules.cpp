// SPDX-License-Identifier: Apache-2.0
#include "ef/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ef {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_rate(double rate, const char* what) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw std::invalid_argument(std::string(what) + " must be positive and finite");
  }
}

void require_common(std::size_t total_epochs, std::size_t ipe) {
  if (total_epochs == 0) throw std::invalid_argument("schedule: total_epochs must be >= 1");
  if (ipe == 0) throw std::invalid_argument("schedule: iterations_per_epoch must be >= 1");
}

std::size_t snapshot_cycle_length(const SnapshotCosineSchedule& s) {
  const std::size_t t = s.total_epochs * s.iterations_per_epoch;
  return (t + s.cycles - 1) / s.cycles;
}

double snapshot_rate(const SnapshotCosineSchedule& s, std::size_t t) {
  const std::size_t len = snapshot_cycle_length(s);
  const std::size_t mod = (t - 1) % len;
  const double angle = std::numbers::pi * (static_cast<double>(mod) / static_cast<double>(len));
  return s.alpha0 / 2.0 * (std::cos(angle) + 1.0);
}

double fge_rate(const FgeSchedule& s, std::size_t t) {
  const std::size_t pretrain_iters = s.pretrain_epochs() * s.iterations_per_epoch;
  if (t <= pretrain_iters) return s.alpha1;
  const std::size_t u = t - pretrain_iters;
  const std::size_t period = s.cycle_length * s.iterations_per_epoch;
  const double phase = static_cast<double>(u % period) / static_cast<double>(period);
  const double height = 1.0 - std::abs(2.0 * phase - 1.0);
  if (height == 1.0) return s.alpha2;
  const double rate = s.alpha1 - (s.alpha1 - s.alpha2) * height;
  return std::clamp(rate, s.alpha2, s.alpha1);
}

std::vector<std::size_t> fge_checkpoints(const FgeSchedule& s) {
  std::vector<std::size_t> out;
  const std::size_t start = s.pretrain_epochs();
  for (std::size_t first = start + 1; first <= s.total_epochs; first += s.cycle_length) {
    std::size_t best = first;
    double best_rate = fge_rate(s, first * s.iterations_per_epoch);
    for (std::size_t e = first + 1; e < first + s.cycle_length; ++e) {
      const double r = fge_rate(s, e * s.iterations_per_epoch);
      if (r < best_rate) {
        best = e;
        best_rate = r;
      }
    }
    if (best <= s.total_epochs) out.push_back(best);
  }
  return out;
}

std::vector<std::size_t> snapshot_checkpoints(const SnapshotCosineSchedule& s) {
  const std::size_t ipe = s.iterations_per_epoch;
  const std::size_t horizon = s.total_epochs * ipe;
  const std::size_t len = snapshot_cycle_length(s);
  std::vector<std::size_t> out;
  for (std::size_t end = len;; end += len) {
    const std::size_t last = std::min(end, horizon);
    // Last whole epoch inside the cycle; the epoch after it already restarts
    // at alpha0 when the cycle length is not a multiple of the epoch length.
    const std::size_t epoch = last / ipe;
    if (epoch > 0 && (out.empty() || out.back() != epoch)) out.push_back(epoch);
    if (last == horizon) break;
  }
  return out;
}

}  // namespace

std::size_t FgeSchedule::pretrain_epochs() const {
  return static_cast<std::size_t>(std::floor(pretrain_fraction * static_cast<double>(total_epochs)));
}

void validate(const ScheduleSpec& spec) {
  std::visit(Overloaded{
                 [](const ConstantSchedule& s) {
                   require_rate(s.rate, "constant rate");
                   require_common(s.total_epochs, s.iterations_per_epoch);
                 },
                 [](const SnapshotCosineSchedule& s) {
                   require_rate(s.alpha0, "snapshot alpha0");
                   require_common(s.total_epochs, s.iterations_per_epoch);
                   if (s.cycles == 0) throw std::invalid_argument("snapshot: cycles must be >= 1");
                   if (s.total_epochs * s.iterations_per_epoch < s.cycles) {
                     throw std::invalid_argument("snapshot: total iterations must be >= cycles");
                   }
                 },
                 [](const FgeSchedule& s) {
                   require_rate(s.alpha1, "fge alpha1");
                   require_rate(s.alpha2, "fge alpha2");
                   require_common(s.total_epochs, s.iterations_per_epoch);
                   if (!(s.alpha1 > s.alpha2)) throw std::invalid_argument("fge: alpha1 must exceed alpha2");
                   if (!(s.pretrain_fraction > 0.0 && s.pretrain_fraction < 1.0)) {
                     throw std::invalid_argument("fge: pretrain_fraction must lie in (0, 1)");
                   }
                   if (s.cycle_length < 2) throw std::invalid_argument("fge: cycle_length must be >= 2 epochs");
                 },
             },
             spec);
}

std::size_t total_epochs(const ScheduleSpec& spec) {
  return std::visit([](const auto& s) { return s.total_epochs; }, spec);
}

std::size_t iterations_per_epoch(const ScheduleSpec& spec) {
  return std::visit([](const auto& s) { return s.iterations_per_epoch; }, spec);
}

std::size_t horizon(const ScheduleSpec& spec) { return total_epochs(spec) * iterations_per_epoch(spec); }

ScheduleSpec with_iterations_per_epoch(ScheduleSpec spec, std::size_t ipe) {
  std::visit([ipe](auto& s) { s.iterations_per_epoch = ipe; }, spec);
  return spec;
}

double lr_at(const ScheduleSpec& spec, std::size_t t) {
  validate(spec);
  if (t < 1 || t > horizon(spec)) {
    throw std::out_of_range("lr_at: iteration " + std::to_string(t) + " outside [1, " +
                            std::to_string(horizon(spec)) + "]");
  }
  return std::visit(Overloaded{
                        [](const ConstantSchedule& s) { return s.rate; },
                        [t](const SnapshotCosineSchedule& s) { return snapshot_rate(s, t); },
                        [t](const FgeSchedule& s) { return fge_rate(s, t); },
                    },
                    spec);
}

std::vector<std::size_t> checkpoint_epochs(const ScheduleSpec& spec) {
  validate(spec);
  return std::visit(Overloaded{
                        [](const ConstantSchedule& s) { return std::vector<std::size_t>{s.total_epochs}; },
                        [](const SnapshotCosineSchedule& s) { return snapshot_checkpoints(s); },
                        [](const FgeSchedule& s) { return fge_checkpoints(s); },
                    },
                    spec);
}

}  // namespace ef
