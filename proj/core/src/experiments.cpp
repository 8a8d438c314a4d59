// SPDX-License-Identifier: Apache-2.0
#include "ef/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "ef/analysis.hpp"
#include "ef/checkpoint.hpp"
#include "ef/errors.hpp"
#include "ef/fusion.hpp"
#include "ef/parallel.hpp"
#include "ef/rng.hpp"

namespace ef {
namespace {

// Stream tags under an experiment seed.
enum Stream : std::uint64_t {
  kPoolSubset = 1,
  kPoolTrain = 2,
  kDraws = 3,
  kCyclicTrain = 4,
  kIndependentTrain = 5,
  kTeachers = 6,
  kSingle = 7,
};

std::uint64_t stream_seed(std::uint64_t seed, Stream tag, std::uint64_t index) {
  return derive_seed(derive_seed(seed, tag), index);
}

std::string num(double v) { return format_value(v); }

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;
};

Stats stats_of(std::span<const double> v) {
  Stats s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

// ---- config parsing -------------------------------------------------------

template <typename T>
T config_check(const char* key, T value, bool ok, const char* requirement) {
  if (!ok) throw ConfigError(std::string(key) + ": " + requirement);
  return value;
}

std::vector<voting::Rule> parse_rules(const ConfigFile& file, const std::string& key,
                                      std::vector<voting::Rule> fallback) {
  const auto names = file.get_list(key);
  if (!names) return fallback;
  std::vector<voting::Rule> rules;
  for (const auto& n : *names) {
    try {
      rules.push_back(voting::parse_rule(n));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  return rules;
}

std::size_t to_size(std::uint64_t v) { return static_cast<std::size_t>(v); }

BlobSpec parse_blobs(const ConfigFile& f, std::size_t per_class, std::uint64_t seed) {
  BlobSpec b;
  b.per_class = per_class;
  b.classes = to_size(f.get_uint("blobs.classes", b.classes));
  b.dims = to_size(f.get_uint("blobs.dims", b.dims));
  b.spread = f.get_double("blobs.spread", b.spread);
  b.separation = f.get_double("blobs.separation", b.separation);
  b.seed = seed;
  return b;
}

NamedSchedule parse_schedule(const ConfigFile& f, const std::string& name, std::size_t epochs,
                             double default_rate) {
  if (name == "constant") {
    return {name, ConstantSchedule{f.get_double("constant.rate", default_rate), epochs, 1}};
  }
  if (name == "snapshot") {
    return {name, SnapshotCosineSchedule{f.get_double("snapshot.alpha0", 0.01), epochs,
                                         to_size(f.get_uint("snapshot.cycles", 6)), 1}};
  }
  if (name == "fge") {
    FgeSchedule s;
    s.pretrain_fraction = f.get_double("fge.pretrain_fraction", s.pretrain_fraction);
    s.alpha1 = f.get_double("fge.alpha1", s.alpha1);
    s.alpha2 = f.get_double("fge.alpha2", s.alpha2);
    s.cycle_length = to_size(f.get_uint("fge.cycle_length", s.cycle_length));
    s.total_epochs = epochs;
    return {name, s};
  }
  throw ConfigError("cyclic.schedules: unknown schedule '" + name + "' (expected constant, snapshot or fge)");
}

// ---- shared evaluation ----------------------------------------------------

Matrix test_probs(const MlpParams& params, const Dataset& test) {
  return softmax(predict_logits(params, test.inputs));
}

void add_similarity_rows(std::vector<ReportRow>& rows, const std::string& exp, std::uint64_t seed,
                         const std::string& cell, const Matrix& sim) {
  rows.push_back(make_row(exp, seed, cell, "similarity_mean", analysis::mean_off_diagonal(sim)));
  for (std::size_t i = 0; i < sim.rows(); ++i) {
    for (std::size_t j = i + 1; j < sim.cols(); ++j) {
      rows.push_back(make_row(exp, seed, cell, "sim_" + std::to_string(i) + "_" + std::to_string(j), sim(i, j)));
    }
  }
}

// Accuracy of each fusion scheme over a set of member outputs.
void add_ensemble_rows(std::vector<ReportRow>& rows, const std::string& exp, std::uint64_t seed,
                       const std::string& cell, const std::vector<Matrix>& probs, const Dataset& test,
                       std::span<const voting::Rule> rules) {
  const fusion::PredictionSet set(probs);
  rows.push_back(make_row(exp, seed, cell, "ensemble_softmax", accuracy(fusion::average_fuse(set), test.labels)));
  for (voting::Rule rule : rules) {
    rows.push_back(make_row(exp, seed, cell, "ensemble_" + std::string(voting::to_string(rule)),
                            accuracy(fusion::vote_fuse(set, rule), test.labels)));
  }
}

// ---- units ----------------------------------------------------------------

struct Unit {
  std::string key;
  std::uint64_t seed = 0;
  std::size_t a = 0;  // experiment-specific indices
  std::size_t b = 0;
};

std::string distill_cell(std::size_t teachers, double p) {
  return "N=" + std::to_string(teachers) + ",p=" + num(p);
}

std::vector<Unit> make_units(const ExperimentConfig& cfg) {
  std::vector<Unit> units;
  switch (cfg.kind) {
    case ExperimentKind::vote:
    case ExperimentKind::cyclic:
      for (auto s : cfg.seeds) units.push_back({std::to_string(s), s, 0, 0});
      break;
    case ExperimentKind::distill:
      for (std::size_t n = 0; n < cfg.distill.teacher_counts.size(); ++n) {
        for (std::size_t p = 0; p < cfg.distill.ps.size(); ++p) {
          const auto cell = distill_cell(cfg.distill.teacher_counts[n], cfg.distill.ps[p]);
          for (auto s : cfg.seeds) units.push_back({std::to_string(s) + "|" + cell, s, n, p});
        }
      }
      break;
    case ExperimentKind::spatial:
      for (std::size_t r = 0; r < cfg.spatial.rules.size(); ++r) {
        const std::string cell(voting::to_string(cfg.spatial.rules[r]));
        for (auto s : cfg.seeds) units.push_back({std::to_string(s) + "|" + cell, s, r, 0});
      }
      break;
  }
  return units;
}

std::vector<ReportRow> run_vote_unit(const ExperimentConfig& cfg, const DataSplit& data, const Unit& unit,
                                     std::size_t workers) {
  const auto& v = cfg.vote;
  const std::uint64_t seed = unit.seed;
  const MlpSpec spec = cfg.model(data.train.feature_count(), data.train.class_count);
  const TrainHyper hyper = cfg.resolved_hyper(data.train.size());

  struct Member {
    Matrix probs;
    std::vector<voting::Ballot> ballots;
    double acc = 0.0;
  };
  const auto pool = parallel_map(v.pool_size, workers, [&](std::size_t i) {
    const auto subset = distill::generate_subset(data.train.size(), {v.subset_p, stream_seed(seed, kPoolSubset, i)});
    const MlpParams params = train_classifier(spec, data.train, subset, hyper, stream_seed(seed, kPoolTrain, i));
    Member m{test_probs(params, data.test), {}, 0.0};
    m.ballots.reserve(m.probs.rows());
    for (std::size_t r = 0; r < m.probs.rows(); ++r) m.ballots.push_back(fusion::to_ranking(m.probs.row(r)));
    m.acc = accuracy(m.probs, data.test.labels);
    return m;
  });

  std::vector<ReportRow> rows;
  std::vector<double> singles;
  for (const auto& m : pool) singles.push_back(m.acc);
  const Stats single = stats_of(singles);
  rows.push_back(make_row("vote", seed, "pool", "models", static_cast<double>(pool.size())));
  rows.push_back(make_row("vote", seed, "pool", "single_mean", single.mean));
  rows.push_back(make_row("vote", seed, "pool", "single_std", single.stddev));

  const std::size_t classes = data.test.class_count;
  const std::size_t examples = data.test.size();
  for (std::size_t n : v.ensemble_sizes) {
    Xoshiro256 rng(stream_seed(seed, kDraws, n));
    std::vector<std::vector<double>> acc(v.rules.size() + 1);
    std::vector<std::size_t> order(pool.size());
    for (std::size_t d = 0; d < v.draws; ++d) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + rng.below(order.size() - i)]);
      const std::span<const std::size_t> members(order.data(), n);

      std::vector<std::size_t> hits(v.rules.size() + 1, 0);
      std::vector<double> avg(classes);
      for (std::size_t e = 0; e < examples; ++e) {
        std::fill(avg.begin(), avg.end(), 0.0);
        voting::PreferenceProfile profile(classes);
        for (std::size_t m : members) {
          const auto row = pool[m].probs.row(e);
          for (std::size_t c = 0; c < classes; ++c) avg[c] += row[c];
          profile.add(pool[m].ballots[e]);
        }
        const std::size_t truth = data.test.labels[e];
        hits[0] += argmax(avg) == truth ? 1 : 0;
        for (std::size_t r = 0; r < v.rules.size(); ++r) hits[r + 1] += voting::elect(profile, v.rules[r]) == truth ? 1 : 0;
      }
      for (std::size_t r = 0; r < hits.size(); ++r) acc[r].push_back(static_cast<double>(hits[r]) / static_cast<double>(examples));
    }
    const std::string cell = "N=" + std::to_string(n);
    for (std::size_t r = 0; r < acc.size(); ++r) {
      const std::string name = r == 0 ? "softmax" : std::string(voting::to_string(v.rules[r - 1]));
      const Stats s = stats_of(acc[r]);
      rows.push_back(make_row("vote", seed, cell, name + "_mean", s.mean));
      rows.push_back(make_row("vote", seed, cell, name + "_std", s.stddev));
    }
  }
  return rows;
}

std::vector<ReportRow> run_cyclic_unit(const ExperimentConfig& cfg, const DataSplit& data, const Unit& unit,
                                       std::size_t workers) {
  const std::uint64_t seed = unit.seed;
  const MlpSpec spec = cfg.model(data.train.feature_count(), data.train.class_count);
  const std::size_t batch = cfg.hyper.batch_size;
  const std::size_t ipe = (data.train.size() + batch - 1) / batch;
  const auto pool = all_indices(data.train.size());
  std::vector<ReportRow> rows;

  std::size_t max_checkpoints = 0;
  std::size_t longest = 0;
  for (const auto& named : cfg.cyclic.schedules) {
    const ScheduleSpec sched = with_iterations_per_epoch(named.spec, ipe);
    const auto epochs = checkpoint_epochs(sched);
    const std::set<std::size_t> wanted(epochs.begin(), epochs.end());
    max_checkpoints = std::max(max_checkpoints, epochs.size());
    longest = std::max(longest, total_epochs(sched));

    std::vector<MlpParams> snapshots;
    TrainHyper hyper = cfg.hyper;
    hyper.iterations = horizon(sched);
    TrainHooks hooks;
    hooks.learning_rate = [&sched](std::size_t t) { return lr_at(sched, t); };
    hooks.after_step = [&](std::size_t t, const MultiHeadNet& net) {
      if (t % ipe == 0 && wanted.count(t / ipe) != 0) snapshots.push_back(to_mlp(net));
    };
    (void)train_classifier(spec, data.train, pool, hyper, stream_seed(seed, kCyclicTrain, 0), hooks);

    std::vector<Matrix> probs;
    std::vector<std::vector<std::size_t>> labels;
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
      if (!cfg.cyclic.checkpoint_dir.empty()) {
        std::filesystem::create_directories(cfg.cyclic.checkpoint_dir);
        save_checkpoint(cfg.cyclic.checkpoint_dir / ("seed" + std::to_string(seed) + "_" + named.name + "_e" +
                                                     std::to_string(epochs[k]) + ".efckpt"),
                        snapshots[k]);
      }
      probs.push_back(test_probs(snapshots[k], data.test));
      labels.push_back(argmax_rows(probs.back()));
      rows.push_back(make_row("cyclic", seed, named.name, "ckpt_e" + std::to_string(epochs[k]),
                              accuracy(labels.back(), data.test.labels)));
    }
    rows.push_back(make_row("cyclic", seed, named.name, "checkpoints", static_cast<double>(snapshots.size())));
    add_ensemble_rows(rows, "cyclic", seed, named.name, probs, data.test, cfg.vote.rules);
    add_similarity_rows(rows, "cyclic", seed, named.name, analysis::similarity_matrix(labels));
  }

  // Independently trained baselines: as many as the largest checkpoint set.
  const std::size_t ind_epochs = cfg.cyclic.independent_epochs != 0 ? cfg.cyclic.independent_epochs : longest;
  TrainHyper hyper = cfg.hyper;
  hyper.adam.learning_rate = cfg.cyclic.baseline_lr;
  hyper.iterations = ind_epochs * ipe;
  const auto models = parallel_map(max_checkpoints, workers, [&](std::size_t i) {
    return train_classifier(spec, data.train, pool, hyper, stream_seed(seed, kIndependentTrain, i));
  });
  std::vector<Matrix> probs;
  std::vector<std::vector<std::size_t>> labels;
  for (std::size_t i = 0; i < models.size(); ++i) {
    probs.push_back(test_probs(models[i], data.test));
    labels.push_back(argmax_rows(probs.back()));
    rows.push_back(make_row("cyclic", seed, "independent", "model_" + std::to_string(i),
                            accuracy(labels.back(), data.test.labels)));
  }
  rows.push_back(make_row("cyclic", seed, "independent", "models", static_cast<double>(models.size())));
  if (!models.empty()) {
    add_ensemble_rows(rows, "cyclic", seed, "independent", probs, data.test, cfg.vote.rules);
    add_similarity_rows(rows, "cyclic", seed, "independent", analysis::similarity_matrix(labels));
  }
  return rows;
}

std::vector<ReportRow> run_distill_unit(const ExperimentConfig& cfg, const DataSplit& data, const Unit& unit,
                                        std::size_t workers) {
  const std::uint64_t seed = unit.seed;
  const std::size_t n_teachers = cfg.distill.teacher_counts[unit.a];
  const double p = cfg.distill.ps[unit.b];
  const std::string cell = distill_cell(n_teachers, p);
  const MlpSpec spec = cfg.model(data.train.feature_count(), data.train.class_count);
  const TrainHyper hyper = cfg.resolved_hyper(data.train.size());
  const std::uint64_t student_seed = derive_seed(seed, kSingle);

  const distill::TeacherBank bank =
      distill::train_teachers(spec, data.train, n_teachers, p, hyper, derive_seed(seed, kTeachers), workers);
  const MlpParams single = train_classifier(spec, data.train, all_indices(data.train.size()), hyper, student_seed);

  std::vector<ReportRow> rows;
  rows.push_back(make_row("distill", seed, cell, "single", accuracy(test_probs(single, data.test), data.test.labels)));
  const auto outputs = distill::teacher_outputs(bank, data.test.inputs);
  std::vector<double> teacher_acc;
  for (const auto& o : outputs) teacher_acc.push_back(accuracy(o, data.test.labels));
  rows.push_back(make_row("distill", seed, cell, "teacher_mean", stats_of(teacher_acc).mean));
  rows.push_back(make_row("distill", seed, cell, "ensemble",
                          accuracy(fusion::average_fuse(fusion::PredictionSet(outputs)), data.test.labels)));

  struct Job {
    distill::Variant variant;
    double alpha;
  };
  std::vector<Job> jobs;
  for (auto variant : cfg.distill.variants) {
    for (double alpha : cfg.distill.alphas) jobs.push_back({variant, alpha});
  }
  const auto acc = parallel_map(jobs.size(), workers, [&](std::size_t j) {
    const distill::DistillConfig dc{jobs[j].variant, jobs[j].alpha, 1.0, n_teachers};
    const auto student_spec = distill::student_spec_for(spec, dc);
    const auto student = distill::train_student(dc, bank, student_spec, data.train, hyper, student_seed);
    return accuracy(distill::student_infer(student, data.test.inputs), data.test.labels);
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    rows.push_back(make_row("distill", seed, cell,
                            std::string(distill::to_string(jobs[j].variant)) + "_a" + num(jobs[j].alpha), acc[j]));
  }
  return rows;
}

std::vector<ReportRow> run_spatial_unit(const ExperimentConfig& cfg, const Unit& unit, std::size_t workers) {
  const auto& s = cfg.spatial;
  const voting::Rule rule = s.rules[unit.a];
  const std::string cell(voting::to_string(rule));
  const auto winners = voting::spatial_election(s.voters, s.candidates, rule, s.trials, unit.seed, workers);
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> dist;
  for (const auto& w : winners) {
    xs.push_back(w.x);
    ys.push_back(w.y);
    dist.push_back(std::hypot(w.x - 0.5, w.y - 0.5));
  }
  const Stats sx = stats_of(xs);
  const Stats sy = stats_of(ys);
  std::vector<ReportRow> rows{
      make_row("spatial", unit.seed, cell, "mean_x", sx.mean),
      make_row("spatial", unit.seed, cell, "mean_y", sy.mean),
      make_row("spatial", unit.seed, cell, "std_x", sx.stddev),
      make_row("spatial", unit.seed, cell, "std_y", sy.stddev),
      make_row("spatial", unit.seed, cell, "mean_center_distance", stats_of(dist).mean),
  };
  if (s.emit_points) {
    for (std::size_t k = 0; k < winners.size(); ++k) {
      rows.push_back(make_row("spatial", unit.seed, cell, "x_" + std::to_string(k), winners[k].x));
      rows.push_back(make_row("spatial", unit.seed, cell, "y_" + std::to_string(k), winners[k].y));
    }
  }
  return rows;
}

RunReport run_kind(const ExperimentConfig& cfg, const RunOptions& options, ExperimentKind expected) {
  if (cfg.kind != expected) throw ConfigError("config is for experiment '" + std::string(to_string(cfg.kind)) + "'");
  const auto start = std::chrono::steady_clock::now();
  const auto units = make_units(cfg);

  std::map<std::string, std::vector<ReportRow>> previous;
  std::set<std::string> known;
  for (const auto& u : units) known.insert(u.key);
  for (const auto& row : options.previous_rows) {
    const auto key = unit_key(cfg, row);
    if (known.count(key) == 0) throw ConfigError("resumed report has rows for unit '" + key + "' not in this config");
    previous[key].push_back(row);
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (previous.count(units[i].key) == 0) pending.push_back(i);
  }
  if (options.max_units && pending.size() > *options.max_units) pending.resize(*options.max_units);

  DataSplit data;
  if (cfg.kind != ExperimentKind::spatial && !pending.empty()) data = load_data(cfg.dataset);

  const std::size_t workers = std::max<std::size_t>(options.workers, 1);
  const std::size_t outer = std::min(workers, std::max<std::size_t>(pending.size(), 1));
  const std::size_t inner = std::max<std::size_t>(workers / outer, 1);
  auto computed = parallel_map(pending.size(), outer, [&](std::size_t i) {
    const Unit& u = units[pending[i]];
    switch (cfg.kind) {
      case ExperimentKind::vote: return run_vote_unit(cfg, data, u, inner);
      case ExperimentKind::cyclic: return run_cyclic_unit(cfg, data, u, inner);
      case ExperimentKind::distill: return run_distill_unit(cfg, data, u, inner);
      case ExperimentKind::spatial: return run_spatial_unit(cfg, u, inner);
    }
    return std::vector<ReportRow>{};
  });

  std::map<std::size_t, std::vector<ReportRow>*> fresh;
  for (std::size_t i = 0; i < pending.size(); ++i) fresh[pending[i]] = &computed[i];

  RunReport report;
  report.config_hash = cfg.config_hash;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const std::vector<ReportRow>* rows = nullptr;
    if (const auto it = previous.find(units[i].key); it != previous.end()) rows = &it->second;
    if (const auto it = fresh.find(i); it != fresh.end()) rows = it->second;
    if (rows != nullptr) report.rows.insert(report.rows.end(), rows->begin(), rows->end());
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::vote: return "vote";
    case ExperimentKind::cyclic: return "cyclic";
    case ExperimentKind::distill: return "distill";
    case ExperimentKind::spatial: return "spatial";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::vote, ExperimentKind::cyclic, ExperimentKind::distill, ExperimentKind::spatial}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "' (expected vote, cyclic, distill or spatial)");
}

DataSplit load_data(const DatasetSpec& spec) {
  DataSplit split;
  if (spec.kind == DatasetSpec::Kind::mnist) {
    split.train = load_mnist_idx(spec.train_images, spec.train_labels);
    split.test = load_mnist_idx(spec.test_images, spec.test_labels);
    if (spec.train_limit != 0 && spec.train_limit < split.train.size()) {
      split.train = split.train.subset(all_indices(spec.train_limit));
    }
    if (spec.test_limit != 0 && spec.test_limit < split.test.size()) {
      split.test = split.test.subset(all_indices(spec.test_limit));
    }
  } else {
    split.train = synth_blobs(spec.train_blobs);
    split.test = synth_blobs(spec.test_blobs);
  }
  if (split.train.size() == 0 || split.test.size() == 0) throw DataError("dataset has no rows");
  return split;
}

MlpSpec ExperimentConfig::model(std::size_t inputs, std::size_t classes) const {
  MlpSpec spec;
  spec.layer_sizes.push_back(inputs);
  spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
  spec.layer_sizes.push_back(classes);
  return spec;
}

TrainHyper ExperimentConfig::resolved_hyper(std::size_t train_size) const {
  TrainHyper h = hyper;
  if (train_epochs != 0) h.iterations = train_epochs * ((train_size + h.batch_size - 1) / h.batch_size);
  return h;
}

ExperimentConfig parse_experiment_config(const ConfigFile& f) {
  ExperimentConfig cfg;
  const auto kind = f.get_string("experiment");
  if (!kind) throw ConfigError(f.source() + ": missing 'experiment'");
  cfg.kind = parse_experiment_kind(*kind);

  const std::string dataset = f.get_string("dataset", cfg.kind == ExperimentKind::spatial ? "none" : "blobs");
  if (dataset == "mnist") {
    auto& d = cfg.dataset;
    d.kind = DatasetSpec::Kind::mnist;
    for (auto [key, field] : {std::pair{"mnist.train_images", &d.train_images}, std::pair{"mnist.train_labels", &d.train_labels},
                              std::pair{"mnist.test_images", &d.test_images}, std::pair{"mnist.test_labels", &d.test_labels}}) {
      const auto value = f.get_string(key);
      if (!value) throw ConfigError(f.source() + ": dataset mnist requires '" + key + "'");
      *field = *value;
    }
    d.train_limit = to_size(f.get_uint("mnist.train_limit", 0));
    d.test_limit = to_size(f.get_uint("mnist.test_limit", 0));
  } else if (dataset == "blobs") {
    cfg.dataset.kind = DatasetSpec::Kind::blobs;
    const std::uint64_t seed = f.get_uint("blobs.seed", 0);
    cfg.dataset.train_blobs = parse_blobs(f, to_size(f.get_uint("blobs.per_class", 200)), derive_seed(seed, 0));
    cfg.dataset.test_blobs = parse_blobs(f, to_size(f.get_uint("blobs.test_per_class", 100)), derive_seed(seed, 1));
  } else if (!(dataset == "none" && cfg.kind == ExperimentKind::spatial)) {
    throw ConfigError("dataset: expected mnist or blobs, got '" + dataset + "'");
  }

  if (const auto hidden = f.get_uint_list("model.hidden")) {
    cfg.hidden.clear();
    for (auto h : *hidden) cfg.hidden.push_back(config_check("model.hidden", to_size(h), h > 0, "sizes must be >= 1"));
  }
  cfg.hyper.adam.learning_rate = f.get_double("adam.lr", cfg.hyper.adam.learning_rate);
  cfg.hyper.adam.beta1 = f.get_double("adam.beta1", cfg.hyper.adam.beta1);
  cfg.hyper.adam.beta2 = f.get_double("adam.beta2", cfg.hyper.adam.beta2);
  cfg.hyper.adam.epsilon = f.get_double("adam.epsilon", cfg.hyper.adam.epsilon);
  cfg.hyper.batch_size = to_size(f.get_uint("train.batch_size", cfg.hyper.batch_size));
  cfg.hyper.iterations = to_size(f.get_uint("train.iterations", cfg.hyper.iterations));
  cfg.train_epochs = to_size(f.get_uint("train.epochs", 0));

  auto& v = cfg.vote;
  v.pool_size = to_size(f.get_uint("vote.pool_size", v.pool_size));
  v.subset_p = f.get_double("vote.subset_p", v.subset_p);
  if (const auto sizes = f.get_uint_list("vote.ensemble_sizes")) {
    v.ensemble_sizes.clear();
    for (auto n : *sizes) v.ensemble_sizes.push_back(to_size(n));
  }
  v.draws = to_size(f.get_uint("vote.draws", v.draws));
  v.rules = parse_rules(f, "vote.rules", v.rules);

  auto& c = cfg.cyclic;
  const std::size_t cyclic_epochs = to_size(f.get_uint("cyclic.epochs", 12));
  c.baseline_lr = f.get_double("cyclic.baseline_lr", cfg.hyper.adam.learning_rate);
  c.independent_epochs = to_size(f.get_uint("cyclic.independent_epochs", 0));
  c.checkpoint_dir = f.get_string("cyclic.checkpoint_dir", "");
  if (cfg.kind == ExperimentKind::cyclic) {
    const auto names = f.get_list("cyclic.schedules").value_or(std::vector<std::string>{"snapshot", "fge"});
    for (const auto& name : names) c.schedules.push_back(parse_schedule(f, name, cyclic_epochs, cfg.hyper.adam.learning_rate));
  }

  auto& d = cfg.distill;
  if (const auto names = f.get_list("distill.variants")) {
    d.variants.clear();
    for (const auto& n : *names) {
      try {
        d.variants.push_back(distill::parse_variant(n));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("distill.variants: ") + e.what());
      }
    }
  }
  d.alphas = f.get_double_list("distill.alphas").value_or(d.alphas);
  d.ps = f.get_double_list("distill.p").value_or(d.ps);
  if (const auto counts = f.get_uint_list("distill.teachers")) {
    d.teacher_counts.clear();
    for (auto n : *counts) d.teacher_counts.push_back(to_size(n));
  }

  auto& s = cfg.spatial;
  s.voters = to_size(f.get_uint("spatial.voters", s.voters));
  s.candidates = to_size(f.get_uint("spatial.candidates", s.candidates));
  s.trials = to_size(f.get_uint("spatial.trials", s.trials));
  s.rules = parse_rules(f, "spatial.rules", s.rules);
  s.emit_points = f.get_bool("spatial.emit_points", s.emit_points);

  if (const auto seeds = f.get_uint_list("seeds")) cfg.seeds = *seeds;
  cfg.workers = to_size(f.get_uint("workers", 1));
  cfg.output = f.get_string("output", "");
  cfg.format = parse_format(f.get_string("format", "csv"));

  if (const auto unused = f.unused_keys(); !unused.empty()) {
    std::string list;
    for (const auto& k : unused) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError(f.source() + ": unknown keys: " + list);
  }

  // Invariants of the sub-configs.
  try {
    cfg.hyper.validate();
    if (cfg.dataset.kind == DatasetSpec::Kind::blobs && cfg.kind != ExperimentKind::spatial) {
      cfg.dataset.train_blobs.validate();
      cfg.dataset.test_blobs.validate();
    }
    for (const auto& sched : c.schedules) validate(sched.spec);
    distill::SubsetSpec{v.subset_p, 0}.validate();
    for (double p : d.ps) distill::SubsetSpec{p, 0}.validate();
    for (double a : d.alphas) {
      if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("distill.alphas must lie in [0, 1]");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(f.source() + ": " + e.what());
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds: at least one seed required");
  {
    std::set<std::uint64_t> unique(cfg.seeds.begin(), cfg.seeds.end());
    if (unique.size() != cfg.seeds.size()) throw ConfigError("seeds: duplicate seed");
  }
  if (cfg.workers == 0) throw ConfigError("workers: must be >= 1");
  switch (cfg.kind) {
    case ExperimentKind::vote:
      if (v.pool_size == 0 || v.draws == 0 || v.ensemble_sizes.empty()) throw ConfigError("vote: pool_size, draws and ensemble_sizes must be nonzero");
      for (auto n : v.ensemble_sizes) {
        if (n == 0 || n > v.pool_size) throw ConfigError("vote.ensemble_sizes: sizes must lie in [1, pool_size]");
      }
      break;
    case ExperimentKind::cyclic:
      if (c.schedules.empty()) throw ConfigError("cyclic.schedules: at least one schedule required");
      break;
    case ExperimentKind::distill:
      if (d.variants.empty() || d.alphas.empty() || d.ps.empty() || d.teacher_counts.empty()) {
        throw ConfigError("distill: variants, alphas, p and teachers must be nonempty");
      }
      for (auto n : d.teacher_counts) {
        if (n == 0) throw ConfigError("distill.teachers: counts must be >= 1");
      }
      break;
    case ExperimentKind::spatial:
      if (s.candidates < 2 || s.voters == 0 || s.trials == 0 || s.rules.empty()) {
        throw ConfigError("spatial: need >= 2 candidates, >= 1 voter, >= 1 trial and a rule");
      }
      break;
  }
  // Where and how the report is written, and how many threads compute it, do
  // not change its rows.
  cfg.config_hash = fnv1a_hex(f.canonical({"workers", "output", "format"}));
  return cfg;
}

UnitPlan plan_units(const ExperimentConfig& config) {
  UnitPlan plan;
  for (const auto& u : make_units(config)) plan.keys.push_back(u.key);
  return plan;
}

std::string unit_key(const ExperimentConfig& config, const ReportRow& row) {
  if (row.experiment != to_string(config.kind)) {
    throw ConfigError("report row for experiment '" + row.experiment + "' does not match the config");
  }
  switch (config.kind) {
    case ExperimentKind::vote:
    case ExperimentKind::cyclic:
      return std::to_string(row.seed);
    case ExperimentKind::distill:
    case ExperimentKind::spatial:
      return std::to_string(row.seed) + "|" + row.cell;
  }
  return {};
}

RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  return run_kind(config, options, config.kind);
}

RunReport run_voting_experiment(const ExperimentConfig& config, const RunOptions& options) {
  return run_kind(config, options, ExperimentKind::vote);
}

RunReport run_cyclic_experiment(const ExperimentConfig& config, const RunOptions& options) {
  return run_kind(config, options, ExperimentKind::cyclic);
}

RunReport run_distill_experiment(const ExperimentConfig& config, const RunOptions& options) {
  return run_kind(config, options, ExperimentKind::distill);
}

RunReport run_spatial_experiment(const ExperimentConfig& config, const RunOptions& options) {
  return run_kind(config, options, ExperimentKind::spatial);
}

}  // namespace ef
