// SPDX-License-Identifier: Apache-2.0
#include "ef/distill.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ef/parallel.hpp"
#include "ef/rng.hpp"

namespace ef::distill {
namespace {

void require_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("distill: alpha must lie in [0, 1]");
}

void require_teachers(std::span<const Matrix> teacher_probs, const Matrix& labels, const char* what) {
  if (teacher_probs.empty()) throw std::invalid_argument(std::string(what) + ": at least one teacher required");
  for (const auto& t : teacher_probs) require_same_shape(t, labels, what);
  if (labels.rows() == 0) throw std::invalid_argument(std::string(what) + ": empty batch");
}

Matrix mean_of(std::span<const Matrix> probs) {
  Matrix out(probs.front().rows(), probs.front().cols());
  auto dst = out.values();
  for (const auto& p : probs) {
    const auto src = p.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  const auto n = static_cast<double>(probs.size());
  for (double& v : dst) v /= n;
  return out;
}

// d/dlogits of alpha * KL(target || softmax) + (1 - alpha) * CE(labels, softmax),
// batch-mean, scaled by `scale`.
Matrix mixed_grad(const Matrix& probs, const Matrix& target, const Matrix& labels, double alpha,
                  double scale) {
  Matrix g(probs.rows(), probs.cols());
  const double inv_b = 1.0 / static_cast<double>(probs.rows());
  const auto p = probs.values();
  const auto t = target.values();
  const auto y = labels.values();
  auto out = g.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (alpha * ((p[i] - t[i]) * inv_b) + (1.0 - alpha) * ((p[i] - y[i]) * inv_b)) * scale;
  }
  return g;
}

}  // namespace

void SubsetSpec::validate() const {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("subset: p must lie in (0, 1]");
}

std::vector<std::size_t> generate_subset(std::size_t dataset_size, const SubsetSpec& spec) {
  spec.validate();
  if (dataset_size == 0) throw std::invalid_argument("generate_subset: empty dataset");
  for (std::uint64_t attempt = 0;; ++attempt) {
    Xoshiro256 rng(spec.seed + attempt);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dataset_size; ++i) {
      if (rng.uniform() < spec.p) out.push_back(i);
    }
    if (!out.empty()) return out;
  }
}

void TeacherBank::validate() const {
  spec.validate();
  if (teachers.size() != subsets.size()) throw std::invalid_argument("TeacherBank: one subset per teacher");
  for (const auto& t : teachers) {
    validate_chain(t.layers);
    if (t.input_size() != spec.input_size() || t.output_size() != spec.output_size()) {
      throw std::invalid_argument("TeacherBank: teacher dimensions differ from the bank spec");
    }
  }
}

MlpParams train_teacher(const MlpSpec& spec, std::span<const std::size_t> subset, const Dataset& data,
                        const TrainHyper& hyper, std::uint64_t seed) {
  if (subset.empty()) throw std::invalid_argument("train_teacher: empty subset");
  return train_classifier(spec, data, subset, hyper, seed);
}

TeacherBank train_teachers(const MlpSpec& spec, const Dataset& data, std::size_t count, double p,
                           const TrainHyper& hyper, std::uint64_t seed, std::size_t workers) {
  TeacherBank bank;
  bank.spec = spec;
  for (std::size_t j = 0; j < count; ++j) bank.subsets.push_back({p, derive_seed(seed, 2 * j)});
  bank.teachers = parallel_map(count, workers, [&](std::size_t j) {
    const auto subset = generate_subset(data.size(), bank.subsets[j]);
    return train_teacher(spec, subset, data, hyper, derive_seed(seed, 2 * j + 1));
  });
  return bank;
}

std::vector<Matrix> teacher_outputs(const TeacherBank& bank, const Matrix& inputs) {
  std::vector<Matrix> out;
  out.reserve(bank.size());
  for (const auto& t : bank.teachers) out.push_back(softmax(predict_logits(t, inputs)));
  return out;
}

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::avg: return "avg";
    case Variant::geo: return "geo";
    case Variant::ind: return "ind";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::avg, Variant::geo, Variant::ind}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown distillation variant '" + std::string(name) + "'");
}

void StudentSpec::validate() const {
  network.validate();
  if (head_count == 0) throw std::invalid_argument("StudentSpec: head_count must be >= 1");
  if (head_mode == HeadMode::single && head_count != 1) {
    throw std::invalid_argument("StudentSpec: single head mode requires head_count 1");
  }
}

void DistillConfig::validate(const StudentSpec& student) const {
  require_alpha(alpha);
  if (temperature != 1.0) throw std::invalid_argument("DistillConfig: temperature is fixed at 1");
  if (teacher_count == 0) throw std::invalid_argument("DistillConfig: teacher_count must be >= 1");
  student.validate();
  if (variant == Variant::ind) {
    if (student.head_mode != HeadMode::per_teacher || student.head_count != teacher_count) {
      throw std::invalid_argument("DistillConfig: variant ind needs one student head per teacher");
    }
  } else if (student.head_mode != HeadMode::single) {
    throw std::invalid_argument("DistillConfig: variants avg and geo need a single-head student");
  }
}

StudentSpec student_spec_for(const MlpSpec& network, const DistillConfig& config) {
  if (config.variant == Variant::ind) return {network, HeadMode::per_teacher, config.teacher_count};
  return {network, HeadMode::single, 1};
}

LossResult loss_avg(const Matrix& student_probs, std::span<const Matrix> teacher_probs,
                    const Matrix& labels, double alpha) {
  require_alpha(alpha);
  require_teachers(teacher_probs, labels, "loss_avg");
  require_same_shape(student_probs, labels, "loss_avg");
  const Matrix mean = mean_of(teacher_probs);
  LossResult out;
  out.value = alpha * kl_divergence(mean, student_probs) + (1.0 - alpha) * cross_entropy(student_probs, labels);
  out.grad_logits.push_back(mixed_grad(student_probs, mean, labels, alpha, 1.0));
  return out;
}

LossResult loss_geo(const Matrix& student_probs, std::span<const Matrix> teacher_probs,
                    const Matrix& labels, double alpha) {
  require_alpha(alpha);
  require_teachers(teacher_probs, labels, "loss_geo");
  require_same_shape(student_probs, labels, "loss_geo");
  double kl = 0.0;
  for (const auto& t : teacher_probs) kl += kl_divergence(t, student_probs);
  kl /= static_cast<double>(teacher_probs.size());
  LossResult out;
  out.value = alpha * kl + (1.0 - alpha) * cross_entropy(student_probs, labels);
  // The mean of the per-teacher gradients (s - t_j) is s - mean_j t_j.
  out.grad_logits.push_back(mixed_grad(student_probs, mean_of(teacher_probs), labels, alpha, 1.0));
  return out;
}

LossResult loss_ind(std::span<const Matrix> head_probs, std::span<const Matrix> teacher_probs,
                    const Matrix& labels, double alpha) {
  require_alpha(alpha);
  require_teachers(teacher_probs, labels, "loss_ind");
  if (head_probs.size() != teacher_probs.size()) {
    throw std::invalid_argument("loss_ind: head count must equal teacher count");
  }
  const double inv_n = 1.0 / static_cast<double>(head_probs.size());
  LossResult out;
  double total = 0.0;
  for (std::size_t j = 0; j < head_probs.size(); ++j) {
    require_same_shape(head_probs[j], labels, "loss_ind");
    total += alpha * kl_divergence(teacher_probs[j], head_probs[j]) +
             (1.0 - alpha) * cross_entropy(head_probs[j], labels);
    out.grad_logits.push_back(mixed_grad(head_probs[j], teacher_probs[j], labels, alpha, inv_n));
  }
  out.value = total / static_cast<double>(head_probs.size());
  return out;
}

Student init_student(const StudentSpec& spec, std::uint64_t seed) {
  spec.validate();
  Student s{spec, as_multi_head(init_params(spec.network, derive_seed(seed, 0)))};
  // Extra heads start as copies; with alpha = 0 they then get identical updates.
  const DenseLayer first = s.net.heads.front();
  for (std::size_t h = 1; h < spec.head_count; ++h) s.net.heads.push_back(first);
  return s;
}

Matrix student_infer(const Student& student, const Matrix& inputs) {
  if (student.net.head_count() != student.spec.head_count) {
    throw std::invalid_argument("student_infer: head count does not match the spec");
  }
  const auto logits = predict_head_logits(student.net, inputs);
  std::vector<Matrix> probs;
  probs.reserve(logits.size());
  for (const auto& l : logits) probs.push_back(softmax(l));
  if (probs.size() == 1) return std::move(probs.front());
  return mean_of(probs);
}

Student train_student(const DistillConfig& config, const TeacherBank& teachers, const StudentSpec& spec,
                      const Dataset& data, const TrainHyper& hyper, std::uint64_t seed) {
  config.validate(spec);
  return train_student(config, teachers, init_student(spec, seed), data, hyper, seed);
}

Student train_student(const DistillConfig& config, const TeacherBank& teachers, Student student,
                      const Dataset& data, const TrainHyper& hyper, std::uint64_t seed) {
  const StudentSpec& spec = student.spec;
  config.validate(spec);
  if (student.net.head_count() != spec.head_count) {
    throw std::invalid_argument("train_student: head count does not match the spec");
  }
  teachers.validate();
  data.validate();
  if (teachers.size() != config.teacher_count) {
    throw std::invalid_argument("train_student: teacher bank size does not match the config");
  }
  if (spec.network.input_size() != data.feature_count() || spec.network.output_size() != data.class_count ||
      teachers.spec.output_size() != data.class_count) {
    throw std::invalid_argument("train_student: network shape does not match the data");
  }

  const std::vector<Matrix> cached = teacher_outputs(teachers, data.inputs);
  auto loss = [&](std::span<const std::size_t> rows, std::span<const Matrix> logits, std::span<Matrix> grads) {
    std::vector<Matrix> batch_teachers;
    batch_teachers.reserve(cached.size());
    for (const auto& t : cached) batch_teachers.push_back(t.gather_rows(rows));
    std::vector<std::size_t> batch_labels;
    batch_labels.reserve(rows.size());
    for (std::size_t r : rows) batch_labels.push_back(data.labels[r]);
    const Matrix y = one_hot(batch_labels, data.class_count);

    LossResult result;
    if (config.variant == Variant::ind) {
      std::vector<Matrix> heads;
      heads.reserve(logits.size());
      for (const auto& l : logits) heads.push_back(softmax(l));
      result = loss_ind(heads, batch_teachers, y, config.alpha);
    } else if (config.variant == Variant::geo) {
      result = loss_geo(softmax(logits[0]), batch_teachers, y, config.alpha);
    } else {
      result = loss_avg(softmax(logits[0]), batch_teachers, y, config.alpha);
    }
    for (std::size_t h = 0; h < grads.size(); ++h) grads[h] = std::move(result.grad_logits[h]);
  };

  student.net = train_net(std::move(student.net), data.inputs, all_indices(data.size()), hyper, seed, loss);
  return student;
}

}  // namespace ef::distill
