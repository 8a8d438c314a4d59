// SPDX-License-Identifier: Apache-2.0
#pragma once

// Multi-teacher distillation: teacher subsets, the three mimicking losses and
// the student.
//
// alpha weighs the imitation term: loss = alpha * KL + (1 - alpha) * CE.
// Temperature is fixed at 1.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ef/data.hpp"
#include "ef/nn.hpp"
#include "ef/train.hpp"

namespace ef::distill {

struct SubsetSpec {
  double p = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Each index kept independently with probability p. If nothing is kept the
/// draw is repeated with seed + 1, seed + 2, ...
[[nodiscard]] std::vector<std::size_t> generate_subset(std::size_t dataset_size, const SubsetSpec& spec);

struct TeacherBank {
  MlpSpec spec;
  std::vector<MlpParams> teachers;
  std::vector<SubsetSpec> subsets;

  [[nodiscard]] std::size_t size() const noexcept { return teachers.size(); }
  void validate() const;
};

[[nodiscard]] MlpParams train_teacher(const MlpSpec& spec, std::span<const std::size_t> subset,
                                      const Dataset& data, const TrainHyper& hyper,
                                      std::uint64_t seed);

/// Teacher j uses subset seed derive_seed(seed, 2 * j) and training seed
/// derive_seed(seed, 2 * j + 1).
[[nodiscard]] TeacherBank train_teachers(const MlpSpec& spec, const Dataset& data,
                                         std::size_t count, double p, const TrainHyper& hyper,
                                         std::uint64_t seed, std::size_t workers = 1);

/// Softmax outputs of every teacher on `inputs`.
[[nodiscard]] std::vector<Matrix> teacher_outputs(const TeacherBank& bank, const Matrix& inputs);

enum class Variant { avg, geo, ind };

[[nodiscard]] std::string_view to_string(Variant v) noexcept;
/// Throws std::invalid_argument on an unknown name.
[[nodiscard]] Variant parse_variant(std::string_view name);

enum class HeadMode { single, per_teacher };

struct StudentSpec {
  MlpSpec network;  // full layer list; per_teacher mode repeats the last layer
  HeadMode head_mode = HeadMode::single;
  std::size_t head_count = 1;

  void validate() const;
};

struct DistillConfig {
  Variant variant = Variant::avg;
  double alpha = 0.5;
  double temperature = 1.0;
  std::size_t teacher_count = 1;

  /// Checks alpha, the fixed temperature, and head-mode compatibility.
  void validate(const StudentSpec& student) const;
};

[[nodiscard]] StudentSpec student_spec_for(const MlpSpec& network, const DistillConfig& config);

struct LossResult {
  double value = 0.0;
  std::vector<Matrix> grad_logits;  // one per student head
};

/// alpha * KL(mean teacher || student) + (1 - alpha) * CE(labels, student).
[[nodiscard]] LossResult loss_avg(const Matrix& student_probs, std::span<const Matrix> teacher_probs,
                                  const Matrix& labels, double alpha);
/// alpha * mean_j KL(teacher_j || student) + (1 - alpha) * CE(labels, student).
[[nodiscard]] LossResult loss_geo(const Matrix& student_probs, std::span<const Matrix> teacher_probs,
                                  const Matrix& labels, double alpha);
/// mean_j [alpha * KL(teacher_j || head_j) + (1 - alpha) * CE(labels, head_j)].
[[nodiscard]] LossResult loss_ind(std::span<const Matrix> head_probs,
                                  std::span<const Matrix> teacher_probs, const Matrix& labels,
                                  double alpha);

struct Student {
  StudentSpec spec;
  MultiHeadNet net;
};

/// Trunk and head from init_params(spec.network, derive_seed(seed, 0)); in
/// per_teacher mode every head starts as a copy of that head.
[[nodiscard]] Student init_student(const StudentSpec& spec, std::uint64_t seed);

/// Softmax of the single head, or the mean of the heads' softmax outputs.
[[nodiscard]] Matrix student_infer(const Student& student, const Matrix& inputs);

/// Trains on every row of `data`. Teacher outputs are computed once up front.
/// With alpha = 0 and a single head the trajectory matches
/// train_classifier(spec.network, data, all rows, hyper, seed).
[[nodiscard]] Student train_student(const DistillConfig& config, const TeacherBank& teachers,
                                    const StudentSpec& spec, const Dataset& data,
                                    const TrainHyper& hyper, std::uint64_t seed);

/// Same, starting from `student` instead of init_student(spec, seed); `seed`
/// only drives the batch order.
[[nodiscard]] Student train_student(const DistillConfig& config, const TeacherBank& teachers,
                                    Student student, const Dataset& data, const TrainHyper& hyper,
                                    std::uint64_t seed);

}  // namespace ef::distill
