// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion ids...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ef/analysis.hpp"
#include "ef/checkpoint.hpp"
#include "ef/config.hpp"
#include "ef/distill.hpp"
#include "ef/experiments.hpp"
#include "ef/nn.hpp"
#include "ef/rng.hpp"
#include "ef/schedules.hpp"
#include "ef/train.hpp"
#include "ef/voting.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ef;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- experiment plumbing ------------------------------------------------

ConfigFile desk_config(const std::string& name) {
  ConfigFile f = ConfigFile::load(fs::path(EF_CONFIG_DIR) / name);
  const fs::path data(EF_TEST_DATA_DIR);
  f.set("mnist.train_images", (data / "mnist5k-train-images-idx3-ubyte.gz").string());
  f.set("mnist.train_labels", (data / "mnist5k-train-labels-idx1-ubyte.gz").string());
  f.set("mnist.test_images", (data / "mnist5k-test-images-idx3-ubyte.gz").string());
  f.set("mnist.test_labels", (data / "mnist5k-test-labels-idx1-ubyte.gz").string());
  return f;
}

// Mean over seeds of the rows matching (cell, metric).
double mean_of(const RunReport& report, const std::string& cell, const std::string& metric) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : report.rows) {
    if (r.cell == cell && r.metric == metric) {
      sum += r.value;
      ++n;
    }
  }
  if (n == 0) throw std::runtime_error("no rows for " + cell + "/" + metric);
  return sum / static_cast<double>(n);
}

RunReport run_desk(const std::string& name, const std::map<std::string, std::string>& overrides = {}) {
  ConfigFile f = desk_config(name);
  for (const auto& [k, v] : overrides) f.set(k, v);
  return run_experiment(parse_experiment_config(f));
}

// ---- 1, 2: voting study ----------------------------------------------------

const RunReport& vote_report() {
  static const RunReport report = run_desk("vote.conf");
  return report;
}

Outcome voting_ordering() {
  const RunReport& rep = vote_report();
  const double plurality = 100 * mean_of(rep, "N=25", "plurality_mean");
  const double borda = 100 * mean_of(rep, "N=25", "borda_mean");
  const double softmax = 100 * mean_of(rep, "N=25", "softmax_mean");
  const bool within = std::abs(plurality - 66.1) <= 4.0 && std::abs(borda - 69.8) <= 4.0 &&
                      std::abs(softmax - 69.7) <= 4.0;
  return {borda - plurality >= 1.5 && softmax >= plurality && within,
          "N=25 plurality " + fmt("%.2f", plurality) + ", borda " + fmt("%.2f", borda) + ", softmax " +
              fmt("%.2f", softmax) + " (targets 66.1 / 69.8 / 69.7, tolerance 4)"};
}

Outcome ensemble_size() {
  const RunReport& rep = vote_report();
  std::set<std::string> rules;
  for (const auto& r : rep.rows) {
    if (r.cell == "N=5" && r.metric.ends_with("_mean")) rules.insert(r.metric);
  }
  bool ok = !rules.empty();
  std::string detail;
  for (const auto& metric : rules) {
    const double gain = 100 * (mean_of(rep, "N=55", metric) - mean_of(rep, "N=5", metric));
    ok = ok && gain >= 5.0;
    detail += (detail.empty() ? "" : ", ") + metric.substr(0, metric.size() - 5) + " " + fmt("%+.2f", gain);
  }
  return {ok, "N=55 minus N=5: " + detail};
}

// ---- 3: finite differences through a two-layer net --------------------------

// Central differences at h = 1e-5 carry about eps * |loss| / h ~ 1e-10 of
// round-off, so gradients below kFloor are compared on that absolute scale.
constexpr double kFloor = 1e-6;

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kFloor});
}

Outcome gradient_check() {
  using distill::Variant;
  constexpr double h = 1e-5;
  constexpr std::size_t teachers = 3;
  Xoshiro256 rng(2024);
  double worst = 0.0;
  std::size_t coords = 0;
  std::size_t instances = 0;
  std::size_t tiny = 0;
  for (Variant v : {Variant::avg, Variant::geo, Variant::ind}) {
    const std::size_t heads = v == Variant::ind ? teachers : 1;
    for (int trial = 0; trial < 20; ++trial, ++instances) {
      MultiHeadNet net = as_multi_head(init_params(MlpSpec{{10, 12, 4}}, rng.next()));
      for (std::size_t k = 1; k < heads; ++k) net.heads.push_back(init_dense(12, 4, rng));
      for (auto t : net.tensors()) {
        for (double& x : t) x = rng.uniform(-1, 1);
      }
      const std::size_t batch = 6;
      Matrix x(batch, 10);
      for (double& e : x.values()) e = rng.normal();
      std::vector<Matrix> targets;
      for (std::size_t j = 0; j < teachers; ++j) {
        Matrix z(batch, 4);
        for (double& e : z.values()) e = 2 * rng.normal();
        targets.push_back(softmax(z));
      }
      Matrix labels(batch, 4);
      for (std::size_t r = 0; r < batch; ++r) labels(r, rng.below(4)) = 1.0;
      const double alpha = rng.uniform();

      auto evaluate = [&](const MultiHeadNet& n, MultiHeadForward* keep) {
        MultiHeadForward fwd = forward(n, x);
        std::vector<Matrix> probs;
        for (const auto& l : fwd.head_logits) probs.push_back(softmax(l));
        distill::LossResult res = v == Variant::ind   ? distill::loss_ind(probs, targets, labels, alpha)
                                  : v == Variant::geo ? distill::loss_geo(probs[0], targets, labels, alpha)
                                                      : distill::loss_avg(probs[0], targets, labels, alpha);
        if (keep != nullptr) *keep = std::move(fwd);
        return res;
      };
      MultiHeadForward fwd;
      const distill::LossResult base = evaluate(net, &fwd);
      const MultiHeadNet grad = backward(net, fwd, base.grad_logits);
      const auto g = grad.tensors();
      auto p = net.tensors();
      for (std::size_t t = 0; t < p.size(); ++t) {
        for (std::size_t i = 0; i < p[t].size(); ++i, ++coords) {
          const double saved = p[t][i];
          p[t][i] = saved + h;
          const double up = evaluate(net, nullptr).value;
          p[t][i] = saved - h;
          const double down = evaluate(net, nullptr).value;
          p[t][i] = saved;
          const double numeric = (up - down) / (2 * h);
          tiny += std::max(std::abs(g[t][i]), std::abs(numeric)) < kFloor ? 1 : 0;
          worst = std::max(worst, rel_error(g[t][i], numeric));
        }
      }
    }
  }
  return {worst < 1e-4, std::to_string(instances) + " instances, " + std::to_string(coords) +
                            " coordinates (" + std::to_string(tiny) +
                            " below the 1e-6 floor), max relative error " + fmt("%.2e", worst)};
}

// ---- 4: distillation identities ------------------------------------------

Dataset blob_set() {
  BlobSpec spec;
  spec.classes = 3;
  spec.dims = 4;
  spec.per_class = 40;
  spec.spread = 1.0;
  spec.seed = 5;
  return synth_blobs(spec);
}

Outcome distill_identities() {
  Xoshiro256 rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 1 + rng.below(8);
    const std::size_t k = 2 + rng.below(6);
    auto random_probs = [&] {
      Matrix z(b, k);
      for (double& e : z.values()) e = 3 * rng.normal();
      return softmax(z);
    };
    const Matrix student = random_probs();
    const std::vector<Matrix> teacher{random_probs()};
    const Matrix labels = random_probs();
    const double alpha = rng.uniform();
    const auto a = distill::loss_avg(student, teacher, labels, alpha);
    const auto g = distill::loss_geo(student, teacher, labels, alpha);
    worst = std::max(worst, std::abs(a.value - g.value));
    for (std::size_t i = 0; i < a.grad_logits[0].size(); ++i) {
      worst = std::max(worst, std::abs(a.grad_logits[0].values()[i] - g.grad_logits[0].values()[i]));
    }
  }
  const bool geo_ok = worst <= 1e-12;

  // alpha = 0 against plain cross-entropy training, compared at several lengths.
  const Dataset data = blob_set();
  const MlpSpec net{{4, 10, 3}};
  TrainHyper hyper;
  hyper.batch_size = 16;
  hyper.adam.learning_rate = 5e-3;
  hyper.iterations = 30;
  const distill::TeacherBank bank = distill::train_teachers(net, data, 2, 0.8, hyper, 3);
  bool alpha0_ok = true;
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (std::size_t iters : {1, 7, 40}) {
    hyper.iterations = iters;
    for (auto v : {distill::Variant::avg, distill::Variant::geo}) {
      const distill::DistillConfig dc{v, 0.0, 1.0, 2};
      const distill::Student s = distill::train_student(dc, bank, distill::student_spec_for(net, dc), data, hyper, 11);
      alpha0_ok = alpha0_ok && to_mlp(s.net) == train_classifier(net, data, all, hyper, 11);
    }
  }

  // Opposed teachers: the geometric-center loss is minimised at [0.5, 0.5].
  const std::vector<Matrix> opposed{Matrix{{1.0, 0.0}}, Matrix{{0.0, 1.0}}};
  const Matrix label{{1.0, 0.0}};
  double best_x = -1.0;
  double best = INFINITY;
  for (int i = 0; i <= 1000; ++i) {
    const double x = i * 1e-3;
    const double value = distill::loss_geo(Matrix{{x, 1.0 - x}}, opposed, label, 1.0).value;
    if (value < best) {
      best = value;
      best_x = x;
    }
  }
  const bool center_ok = std::abs(best_x - 0.5) <= 1e-3 + 1e-12;

  return {geo_ok && alpha0_ok && center_ok,
          "geo-avg N=1 max diff " + fmt("%.1e", worst) + "; alpha=0 trajectory " +
              (alpha0_ok ? "identical" : "differs") + "; grid minimiser " + fmt("%.3f", best_x)};
}

// ---- 5: distillation ordering ---------------------------------------------

Outcome distill_ordering() {
  const RunReport rep = run_desk("distill.conf");
  std::map<std::string, std::vector<double>> by;
  for (const auto& r : rep.rows) {
    const auto cut = r.metric.find("_a");
    by[cut == std::string::npos ? r.metric : r.metric.substr(0, cut)].push_back(r.value);
  }
  auto mean = [&](const std::string& k) {
    const auto& v = by.at(k);
    double s = 0.0;
    for (double x : v) s += x;
    return 100 * s / static_cast<double>(v.size());
  };
  std::set<std::uint64_t> seeds;
  for (const auto& r : rep.rows) seeds.insert(r.seed);
  const double single = mean("single");
  const double ind = mean("ind");
  const double avg = mean("avg");
  return {seeds.size() >= 10 && ind > single && ind >= avg,
          std::to_string(seeds.size()) + " seeds: single " + fmt("%.2f", single) + ", avg " + fmt("%.2f", avg) +
              ", geo " + fmt("%.2f", mean("geo")) + ", ind " + fmt("%.2f", ind) + ", teacher ensemble " +
              fmt("%.2f", mean("ensemble"))};
}

// ---- 6: ambiguity decomposition -------------------------------------------

Outcome ambiguity() {
  Xoshiro256 rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t r = 2 + rng.below(49);
    const std::size_t m = 1 + rng.below(10);
    Matrix o(r, m);
    for (double& v : o.values()) v = rng.normal() * rng.uniform(0.1, 2.0) + rng.uniform(-1, 1);
    const double y = rng.normal();

    std::vector<double> mu(m, 0.0);
    for (std::size_t k = 0; k < r; ++k) {
      for (std::size_t i = 0; i < m; ++i) mu[i] += o(k, i) / static_cast<double>(r);
    }
    double bias = 0.0, var = 0.0, covar = 0.0, lhs = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      bias += (mu[i] - y) / static_cast<double>(m);
      for (std::size_t k = 0; k < r; ++k) {
        var += (o(k, i) - mu[i]) * (o(k, i) - mu[i]) / static_cast<double>(r * m);
        for (std::size_t j = 0; j < m; ++j) {
          if (j != i) covar += (o(k, i) - mu[i]) * (o(k, j) - mu[j]) / static_cast<double>(r * m * (m - 1));
        }
      }
    }
    for (std::size_t k = 0; k < r; ++k) {
      double f = 0.0;
      for (std::size_t i = 0; i < m; ++i) f += o(k, i) / static_cast<double>(m);
      lhs += (f - y) * (f - y) / static_cast<double>(r);
    }
    const double md = static_cast<double>(m);
    const double rhs = bias * bias + var / md + (1.0 - 1.0 / md) * covar;
    const analysis::AmbiguityReport rep = analysis::ambiguity_decompose(o, y);
    worst = std::max({worst, std::abs(lhs - rhs), std::abs(rep.lhs_mse - rep.rhs_total),
                      std::abs(rep.lhs_mse - lhs), std::abs(rep.rhs_total - rhs)});
  }
  return {worst < 1e-10, "1000 instances, max |LHS - RHS| " + fmt("%.2e", worst)};
}

// ---- 7: schedules -----------------------------------------------------------

Outcome schedules() {
  const ScheduleSpec snap = SnapshotCosineSchedule{0.1, 300, 6, 1};
  const bool start = lr_at(snap, 1) == 0.1;
  const bool mid = lr_at(snap, 26) == 0.05;
  const bool snap_ckpt = checkpoint_epochs(snap) == std::vector<std::size_t>{50, 100, 150, 200, 250, 300};

  const FgeSchedule fge_raw{0.75, 1e-2, 5e-4, 4, 100, 10};
  const ScheduleSpec fge = fge_raw;
  bool band = true;
  for (std::size_t t = 1; t <= horizon(fge); ++t) {
    const double lr = lr_at(fge, t);
    band = band && lr >= 5e-4 && lr <= 1e-2;
  }
  // Troughs sit at (k + 0.5) C epochs past the pretraining phase.
  bool troughs = true;
  std::vector<std::size_t> expected;
  for (std::size_t k = 0; 75 + (2 * k + 1) * 2 <= 100; ++k) {
    const std::size_t epoch = 75 + (2 * k + 1) * 2;
    expected.push_back(epoch);
    troughs = troughs && lr_at(fge, epoch * 10) == 5e-4;
  }
  troughs = troughs && checkpoint_epochs(fge) == expected;
  return {start && mid && snap_ckpt && band && troughs,
          std::string("snapshot start ") + (start ? "ok" : "bad") + ", midpoint " + (mid ? "ok" : "bad") +
              ", checkpoints " + (snap_ckpt ? "ok" : "bad") + "; fge band " + (band ? "ok" : "bad") + ", troughs " +
              (troughs ? "ok" : "bad")};
}

// ---- 8: cyclic similarity -------------------------------------------------

Outcome cyclic_similarity() {
  const fs::path dir = fs::temp_directory_path() / "ef-acceptance-checkpoints";
  const RunReport rep = run_desk("cyclic.conf", {{"cyclic.checkpoint_dir", dir.string()}});
  fs::remove_all(dir);
  std::map<std::uint64_t, double> snap;
  std::map<std::uint64_t, double> indep;
  std::map<std::size_t, std::vector<double>> ckpt;
  for (const auto& r : rep.rows) {
    if (r.cell == "snapshot" && r.metric.starts_with("ckpt_e")) ckpt[std::stoul(r.metric.substr(6))].push_back(r.value);
    if (r.metric != "similarity_mean") continue;
    if (r.cell == "snapshot") snap[r.seed] = r.value;
    if (r.cell == "independent") indep[r.seed] = r.value;
  }
  if (snap.size() < 5 || snap.size() != indep.size()) return {false, "expected snapshot and independent rows for >= 5 seeds"};
  double s = 0.0, i = 0.0;
  std::size_t wins = 0;
  for (const auto& [seed, v] : snap) {
    s += v;
    i += indep.at(seed);
    wins += v > indep.at(seed) ? 1 : 0;
  }
  s /= static_cast<double>(snap.size());
  i /= static_cast<double>(snap.size());
  std::string curve;
  for (const auto& [epoch, acc] : ckpt) {
    double m = 0.0;
    for (double a : acc) m += a;
    curve += (curve.empty() ? "" : " ") + std::to_string(epoch) + ":" + fmt("%.2f", 100 * m / static_cast<double>(acc.size()));
  }
  return {s > i, std::to_string(snap.size()) + " seeds: snapshot similarity " + fmt("%.4f", s) + ", independent " +
                     fmt("%.4f", i) + ", snapshot higher in " + std::to_string(wins) + " seeds; checkpoint accuracy " +
                     curve};
}

// ---- 9: Condorcet consistency ---------------------------------------------

Outcome condorcet() {
  Xoshiro256 rng(9);
  std::size_t found = 0, copeland_hits = 0, minimax_hits = 0, draws = 0;
  while (found < 1000) {
    ++draws;
    const std::size_t c = 3 + rng.below(4);
    const std::size_t voters = 1 + rng.below(15);
    voting::PreferenceProfile profile(c);
    std::vector<std::vector<std::size_t>> ballots;
    for (std::size_t v = 0; v < voters; ++v) {
      std::vector<std::size_t> rank(c);
      for (std::size_t i = 0; i < c; ++i) rank[i] = i;
      shuffle(std::span<std::size_t>(rank), rng);
      ballots.push_back(rank);
      profile.add(voting::Ballot(rank));
    }
    // Brute force: a candidate beating every other by strict majority.
    std::optional<std::size_t> winner;
    for (std::size_t a = 0; a < c && !winner; ++a) {
      bool beats_all = true;
      for (std::size_t b = 0; b < c && beats_all; ++b) {
        if (a == b) continue;
        int margin = 0;
        for (const auto& r : ballots) {
          const auto pa = std::find(r.begin(), r.end(), a) - r.begin();
          const auto pb = std::find(r.begin(), r.end(), b) - r.begin();
          margin += pa < pb ? 1 : -1;
        }
        beats_all = margin > 0;
      }
      if (beats_all) winner = a;
    }
    if (!winner) continue;
    ++found;
    copeland_hits += voting::elect(profile, voting::Rule::copeland) == *winner ? 1 : 0;
    minimax_hits += voting::elect(profile, voting::Rule::minimax) == *winner ? 1 : 0;
  }
  return {copeland_hits == 1000 && minimax_hits == 1000,
          "copeland " + std::to_string(copeland_hits) + "/1000, minimax " + std::to_string(minimax_hits) +
              "/1000 (" + std::to_string(draws) + " profiles drawn)"};
}

// ---- 10: checkpoints and determinism --------------------------------------

const char* const kBlobs =
    "dataset = blobs\nblobs.per_class = 30\nblobs.test_per_class = 20\nblobs.classes = 4\nblobs.dims = 5\n"
    "blobs.spread = 1.2\nblobs.seed = 3\nmodel.hidden = 12, 12\ntrain.batch_size = 20\ntrain.iterations = 30\n"
    "adam.lr = 0.003\nseeds = 1, 2, 3\n";

Outcome round_trip() {
  Xoshiro256 rng(10);
  const fs::path dir = fs::temp_directory_path() / ("ef-acceptance-" + std::to_string(rng.next()));
  fs::create_directories(dir);
  bool bits_ok = true;
  for (int i = 0; i < 20; ++i) {
    MlpParams p = init_params(MlpSpec{{1 + rng.below(30), 1 + rng.below(20), 1 + rng.below(10)}}, rng.next());
    for (auto t : p.tensors()) {
      for (double& x : t) x = rng.normal() * std::ldexp(1.0, static_cast<int>(rng.below(200)) - 100);
    }
    const fs::path file = dir / ("p" + std::to_string(i) + ".efckpt");
    save_checkpoint(file, p);
    const MlpParams q = load_checkpoint(file);
    const auto a = p.tensors();
    const auto b = q.tensors();
    bits_ok = bits_ok && a.size() == b.size();
    for (std::size_t t = 0; bits_ok && t < a.size(); ++t) {
      bits_ok = a[t].size() == b[t].size() && std::memcmp(a[t].data(), b[t].data(), a[t].size_bytes()) == 0;
    }
  }

  const std::vector<std::string> kinds{
      "experiment = vote\nvote.pool_size = 10\nvote.subset_p = 0.5\nvote.ensemble_sizes = 1, 3, 7\nvote.draws = 5\n",
      "experiment = cyclic\ncyclic.schedules = snapshot, fge, constant\ncyclic.epochs = 6\nsnapshot.alpha0 = 0.01\n"
      "snapshot.cycles = 3\nfge.cycle_length = 2\nfge.pretrain_fraction = 0.5\n",
      "experiment = distill\ndistill.teachers = 3\ndistill.p = 0.7\n",
      "experiment = spatial\nspatial.voters = 15\nspatial.trials = 200\nseeds = 1, 2\n"};
  bool det_ok = true;
  std::size_t rows = 0;
  for (const auto& text : kinds) {
    const bool spatial = text.starts_with("experiment = spatial");
    const ExperimentConfig cfg =
        parse_experiment_config(ConfigFile::parse((spatial ? "" : kBlobs) + text, "<acceptance>"));
    RunOptions one;
    RunOptions eight;
    eight.workers = 8;
    const RunReport a = run_experiment(cfg, one);
    const RunReport b = run_experiment(cfg, one);
    const RunReport c = run_experiment(cfg, eight);
    det_ok = det_ok && !a.rows.empty() && a.rows == b.rows && a.rows == c.rows && a.config_hash == c.config_hash;
    rows += a.rows.size();
  }
  fs::remove_all(dir);
  return {bits_ok && det_ok, std::string("20 checkpoints ") + (bits_ok ? "bit-exact" : "differ") + "; " +
                                 std::to_string(rows) + " rows over 4 experiment kinds " +
                                 (det_ok ? "identical" : "differ") + " across repeats and workers 1/8"};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "voting ordering", voting_ordering},
      {2, "ensemble-size monotonicity", ensemble_size},
      {3, "gradient correctness", gradient_check},
      {4, "distillation identities", distill_identities},
      {5, "distillation ordering", distill_ordering},
      {6, "ambiguity decomposition", ambiguity},
      {7, "schedule exactness", schedules},
      {8, "cyclic similarity", cyclic_similarity},
      {9, "condorcet consistency", condorcet},
      {10, "round trip and determinism", round_trip},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && wanted.count(c.id) == 0) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += out.pass ? 0 : 1;
    std::printf("%s %d %s: %s [%.1fs]\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
