// SPDX-License-Identifier: Apache-2.0
#pragma once

// Desk-scale experiment runners. Each experiment is split into independent
// units (see unit_key); units run concurrently and their rows are merged in
// unit order, so reports do not depend on the worker count.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ef/config.hpp"
#include "ef/data.hpp"
#include "ef/distill.hpp"
#include "ef/nn.hpp"
#include "ef/report.hpp"
#include "ef/schedules.hpp"
#include "ef/train.hpp"
#include "ef/voting.hpp"

namespace ef {

enum class ExperimentKind { vote, cyclic, distill, spatial };

[[nodiscard]] std::string_view to_string(ExperimentKind kind) noexcept;
[[nodiscard]] ExperimentKind parse_experiment_kind(std::string_view name);

struct DatasetSpec {
  enum class Kind { mnist, blobs } kind = Kind::blobs;
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::size_t train_limit = 0;  // 0 keeps every row
  std::size_t test_limit = 0;
  BlobSpec train_blobs;
  BlobSpec test_blobs;
};

struct DataSplit {
  Dataset train;
  Dataset test;
};

/// Throws DataError when files are missing or malformed.
[[nodiscard]] DataSplit load_data(const DatasetSpec& spec);

struct VoteSettings {
  std::size_t pool_size = 200;
  double subset_p = 0.25;
  std::vector<std::size_t> ensemble_sizes{1, 5, 25, 55};
  std::size_t draws = 50;
  std::vector<voting::Rule> rules{voting::Rule::plurality, voting::Rule::borda,
                                  voting::Rule::dowdall,   voting::Rule::minimax,
                                  voting::Rule::copeland,  voting::Rule::stv};
};

struct NamedSchedule {
  std::string name;
  ScheduleSpec spec;  // epochs; iterations_per_epoch is filled in from the data
};

struct CyclicSettings {
  std::vector<NamedSchedule> schedules;
  double baseline_lr = 1e-3;           // constant rate of the independently trained models
  std::size_t independent_epochs = 0;  // 0: same as the schedule's total epochs
  std::filesystem::path checkpoint_dir;  // empty: keep checkpoints in memory only
};

struct DistillSettings {
  std::vector<distill::Variant> variants{distill::Variant::avg, distill::Variant::geo,
                                         distill::Variant::ind};
  std::vector<double> alphas{0.25, 0.5};
  std::vector<double> ps{1.0};
  std::vector<std::size_t> teacher_counts{3};
};

struct SpatialSettings {
  std::size_t voters = 100;
  std::size_t candidates = 5;
  std::size_t trials = 10000;
  std::vector<voting::Rule> rules{voting::Rule::plurality, voting::Rule::borda,
                                  voting::Rule::dowdall,   voting::Rule::minimax,
                                  voting::Rule::copeland,  voting::Rule::stv};
  bool emit_points = false;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::vote;
  DatasetSpec dataset;
  std::vector<std::size_t> hidden{50, 50};
  TrainHyper hyper;
  std::size_t train_epochs = 0;  // when set, overrides hyper.iterations (epochs over the training set)
  VoteSettings vote;
  CyclicSettings cyclic;
  DistillSettings distill;
  SpatialSettings spatial;
  std::vector<std::uint64_t> seeds{1};
  std::size_t workers = 1;
  std::filesystem::path output;
  ReportFormat format = ReportFormat::csv;
  std::string config_hash;

  /// Network shape for a dataset with the given input width and class count.
  [[nodiscard]] MlpSpec model(std::size_t inputs, std::size_t classes) const;
  /// hyper with the iteration count resolved for a training set of `train_size` rows.
  [[nodiscard]] TrainHyper resolved_hyper(std::size_t train_size) const;
};

/// Builds and validates a config. Unknown keys are a ConfigError, as is any
/// sub-config violating its own invariants.
[[nodiscard]] ExperimentConfig parse_experiment_config(const ConfigFile& file);

struct RunOptions {
  std::size_t workers = 1;
  /// Run at most this many not-yet-completed units.
  std::optional<std::size_t> max_units;
  /// Rows from an earlier partial run; units found here are not recomputed.
  std::vector<ReportRow> previous_rows;
};

struct UnitPlan {
  std::vector<std::string> keys;  // in merge order
};

[[nodiscard]] UnitPlan plan_units(const ExperimentConfig& config);
/// Unit a row belongs to.
[[nodiscard]] std::string unit_key(const ExperimentConfig& config, const ReportRow& row);

/// Runs the configured experiment. Only completed units contribute rows.
[[nodiscard]] RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

[[nodiscard]] RunReport run_voting_experiment(const ExperimentConfig& config, const RunOptions& options = {});
[[nodiscard]] RunReport run_cyclic_experiment(const ExperimentConfig& config, const RunOptions& options = {});
[[nodiscard]] RunReport run_distill_experiment(const ExperimentConfig& config, const RunOptions& options = {});
[[nodiscard]] RunReport run_spatial_experiment(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace ef
