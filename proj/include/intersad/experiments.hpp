#pragma once

// Desk-scale experiment suite: each reproduce target trains what it needs,
// writes tidy CSVs, and checks its acceptance thresholds. Trained runs are
// cached by resolved config so targets that share runs train once.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "intersad/config.hpp"
#include "intersad/detectors.hpp"
#include "intersad/trainer.hpp"

namespace intersad {

// ---------------------------------------------------------------------------
// Small statistics helpers

inline double mean_of(std::span<const double> v) {
  require(!v.empty(), "mean of an empty set");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample variance (n - 1 denominator); 0 for a single value.
inline double variance_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

inline std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return rank;
}

// Pearson correlation of midranks. NaN when either side is constant.
inline double spearman(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, "spearman needs two equal-length samples");
  const auto ra = midranks(a);
  const auto rb = midranks(b);
  const double ma = mean_of(ra);
  const double mb = mean_of(rb);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nan("");
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------
// Outcome of one reproduce target

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct FigureOutcome {
  std::string id;
  std::vector<Check> checks;
  std::vector<std::string> files;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  std::string summary() const {
    std::string s = id + ": " + (pass() ? "PASS" : "FAIL");
    for (const auto& c : checks) s += " [" + c.name + " " + (c.pass ? "ok" : "fail") + ": " + c.detail + "]";
    return s;
  }
};

inline std::string fmt(double v) { return format_double(std::round(v * 1e6) / 1e6); }

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids = {"table3", "table5", "fig4a", "fig4bc",
                                               "fig5",   "fig6a",  "fig6b", "fig6c"};
  return ids;
}

// ---------------------------------------------------------------------------
// Suite

struct SuiteSettings {
  std::size_t seeds = 5;
  // Seeds used by the horizon and embedding-size sweeps.
  std::size_t sweep_seeds = 3;
  std::vector<double> contamination_levels = {0.2, 0.1, 0.05};
  std::vector<double> noise_levels = {0.0, 0.1, 0.2, 0.3, 0.5};
  std::vector<double> horizons = {2, 4, 6, 8, 10};
  std::vector<double> embedding_dims = {8, 16, 24};
  std::size_t fig4a_testings = 10;
  std::size_t fig4bc_size = 100;
};

class ExperimentSuite {
 public:
  ExperimentSuite(ExperimentConfig transition, ExperimentConfig reward, std::uint64_t seed,
                  std::filesystem::path out_dir, SuiteSettings settings = {})
      : transition_(std::move(transition)),
        reward_(std::move(reward)),
        seed_(seed),
        out_(std::move(out_dir)),
        settings_(std::move(settings)) {
    require(transition_.train.mode == Mode::transition, "transition base config must be in transition mode");
    require(reward_.train.mode == Mode::reward, "reward base config must be in reward mode");
    require(settings_.seeds >= 2, "suite needs at least two seeds");
    std::filesystem::create_directories(out_);
  }

  static ExperimentSuite with_defaults(std::uint64_t seed, std::filesystem::path out_dir) {
    return ExperimentSuite(default_config(Mode::transition), default_config(Mode::reward), seed,
                           std::move(out_dir));
  }

  const SuiteSettings& settings() const { return settings_; }

  // Config of the k-th replicate: fresh members, model init and rollout
  // streams; the shared fleet model comes from the base config. Snapshots
  // are always kept so cached runs serve every target.
  ExperimentConfig replicate(const ExperimentConfig& base, std::size_t k) const {
    ExperimentConfig c = base;
    c.train.keep_policy_snapshots = true;
    c.train.seed = derive_seed(seed_, 0x5eed, k);
    c.train.fleet_common().member_seed = derive_seed(seed_, 0x3e3b, k);
    c.eval.fleet_seed = derive_seed(seed_, 0xf1ee7, k);
    c.eval.seed = derive_seed(seed_, 0xe7a1, k);
    return c;
  }

  const TrainResult& run(const ExperimentConfig& cfg) {
    std::ostringstream key;
    write_config(key, cfg);
    auto it = cache_.find(key.str());
    if (it == cache_.end()) {
      it = cache_.emplace(key.str(), std::make_unique<TrainResult>(train(cfg.train))).first;
    }
    return *it->second;
  }

  FigureOutcome reproduce(const std::string& id) {
    if (id == "table3") return table3();
    if (id == "table5") return table5();
    if (id == "fig4a") return fig4a();
    if (id == "fig4bc") return fig4bc();
    if (id == "fig5") return fig5();
    if (id == "fig6a") return fig6a();
    if (id == "fig6b") return fig6b();
    if (id == "fig6c") return fig6c();
    throw ContractViolation("unknown figure id '" + id + "'");
  }

  // Transition fleet: trained policy vs random activation.
  FigureOutcome table3() {
    FigureOutcome out{"table3", {}, {}};
    std::map<std::string, std::vector<double>> auc;
    const std::vector<std::pair<std::string, Scorer>> baselines = {
        {"rs_iforest", Scorer::iforest}, {"rs_lof", Scorer::lof}, {"rs_knn", Scorer::knn}};
    for (std::size_t k = 0; k < settings_.seeds; ++k) {
      const ExperimentConfig cfg = replicate(transition_, k);
      const Fleet test = make_eval_fleet(cfg);
      for (const auto& [name, scorer] : baselines) {
        EvalConfig e = cfg.eval.eval_config();
        e.space = FeatureSpace::trajectory;
        e.scorer = scorer;
        auc[name].push_back(*evaluate_random(test, cfg.train.horizon, e).auc);
      }
      const TrainResult& r = run(cfg);
      EvalConfig e = cfg.eval.eval_config();
      e.space = FeatureSpace::trajectory;
      e.scorer = Scorer::iforest;
      auc["intersad_t"].push_back(*evaluate(r.policy, r.embedder, test, e).auc);
    }
    const std::vector<std::string> order = {"rs_iforest", "rs_lof", "rs_knn", "intersad_t"};
    std::ostringstream csv;
    csv << "# transition fleet; knn distance scorer stands in for the one-class SVM baseline\n";
    csv << "detector,auc_mean,auc_std\n";
    for (const auto& d : order) {
      csv << d << ',' << fmt(mean_of(auc[d])) << ',' << fmt(std::sqrt(variance_of(auc[d]))) << '\n';
    }
    write(out, "table3.csv", csv.str());
    write(out, "table3_runs.csv", runs_csv(auc, order));

    const double ours = mean_of(auc["intersad_t"]);
    out.checks.push_back({"intersad_t>=0.90", ours >= 0.90, "mean " + fmt(ours)});
    for (const auto& [name, scorer] : baselines) {
      const double gap = ours - mean_of(auc[name]);
      out.checks.push_back({"gap_vs_" + name + ">=0.05", gap >= 0.05, "gap " + fmt(gap)});
    }
    return out;
  }

  // Reward fleet at decreasing contamination; trained once per seed at the
  // configured rate, tested at every level.
  FigureOutcome table5() {
    FigureOutcome out{"table5", {}, {}};
    const auto& levels = settings_.contamination_levels;
    // detector -> level index -> per-seed AUC
    std::map<std::string, std::vector<std::vector<double>>> auc;
    const std::vector<std::string> order = {"rr_iforest", "rr_lof", "rr_knn", "mean_reward", "intersad_r"};
    for (const auto& d : order) auc[d].assign(levels.size(), {});
    for (std::size_t k = 0; k < settings_.seeds; ++k) {
      const ExperimentConfig cfg = replicate(reward_, k);
      const TrainResult& r = run(cfg);
      for (std::size_t l = 0; l < levels.size(); ++l) {
        ExperimentConfig at = cfg;
        at.train.reward_fleet.contamination_rate = levels[l];
        const Fleet test = make_eval_fleet(at);
        EvalConfig e = cfg.eval.eval_config();
        e.space = FeatureSpace::reward;
        auc["intersad_r"][l].push_back(*evaluate(r.policy, r.embedder, test, e).auc);
        const std::vector<std::pair<std::string, Scorer>> baselines = {{"rr_iforest", Scorer::iforest},
                                                                       {"rr_lof", Scorer::lof},
                                                                       {"rr_knn", Scorer::knn},
                                                                       {"mean_reward", Scorer::meanreward}};
        for (const auto& [name, scorer] : baselines) {
          e.scorer = scorer;
          auc[name][l].push_back(*evaluate_random(test, cfg.train.horizon, e).auc);
        }
      }
    }
    std::ostringstream csv;
    csv << "# reward fleet; baselines use random activation; intersad_r scores rewards with the "
        << to_string(reward_.eval.scorer) << " scorer\n";
    csv << "detector,a_pct,auc_mean,auc_std\n";
    std::ostringstream runs;
    runs << "detector,a_pct,replicate,auc\n";
    for (const auto& d : order) {
      for (std::size_t l = 0; l < levels.size(); ++l) {
        csv << d << ',' << fmt(100 * levels[l]) << ',' << fmt(mean_of(auc[d][l])) << ','
            << fmt(std::sqrt(variance_of(auc[d][l]))) << '\n';
        for (std::size_t k = 0; k < auc[d][l].size(); ++k) {
          runs << d << ',' << fmt(100 * levels[l]) << ',' << k << ',' << fmt(auc[d][l][k]) << '\n';
        }
      }
    }
    write(out, "table5.csv", csv.str());
    write(out, "table5_runs.csv", runs.str());

    std::vector<double> ours;
    std::vector<double> baseline;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      ours.push_back(mean_of(auc["intersad_r"][l]));
      baseline.push_back(mean_of(auc["mean_reward"][l]));
    }
    // Levels are listed from most to least contaminated.
    out.checks.push_back({"intersad_r@" + fmt(100 * levels.front()) + "%>=0.90", ours.front() >= 0.90,
                          "mean " + fmt(ours.front())});
    bool monotone = true;
    std::string trail;
    for (std::size_t l = 0; l < ours.size(); ++l) {
      trail += (l ? " -> " : "") + fmt(ours[l]);
      if (l > 0 && ours[l] > ours[l - 1]) monotone = false;
    }
    out.checks.push_back({"non_increasing", monotone, trail});
    const double drop = ours.front() - ours.back();
    const double base_drop = baseline.front() - baseline.back();
    out.checks.push_back({"smaller_drop_than_mean_reward", drop < base_drop,
                          "intersad_r " + fmt(drop) + " vs mean_reward " + fmt(base_drop)});
    return out;
  }

  // Checkpointed policies of one reward run, each tested on fresh probe
  // rollouts at the lowest contamination; embeddings use the final encoder.
  FigureOutcome fig4a() {
    FigureOutcome out{"fig4a", {}, {}};
    const ExperimentConfig cfg = replicate(reward_, 0);
    const TrainResult& r = run(cfg);

    TrainConfig probe_cfg = cfg.train;
    probe_cfg.reward_fleet.contamination_rate = settings_.contamination_levels.back();
    const Fleet probe = make_probe_fleet(probe_cfg);

    std::ostringstream csv;
    csv << "checkpoint_iter,sen_total,auc\n";
    std::ostringstream detail;
    detail << "checkpoint_iter,testing,sen_total,sen_total_sq,auc\n";
    std::vector<double> sens;
    std::vector<double> aucs;
    for (const auto& [iter, policy] : r.policy_snapshots) {
      std::vector<double> s;
      std::vector<double> a;
      for (std::size_t j = 0; j < settings_.fig4a_testings; ++j) {
        EvalConfig e = cfg.eval.eval_config();
        e.space = FeatureSpace::reward;
        e.seed = derive_seed(cfg.eval.seed, 0x4a, j);
        const auto records = roll_out_fleet(probe, policy, eval_rollout(cfg.train.horizon, e));
        const auto u = embed_records(r.embedder, records);
        const auto c = centroid(u);
        double total = 0.0;
        double total_sq = 0.0;
        for (const auto& v : u) {
          const double d = euclidean(v, c);
          total += d;
          total_sq += d * d;
        }
        const double auc = *score_records(records, probe, &r.embedder, e).auc;
        s.push_back(total);
        a.push_back(auc);
        detail << iter << ',' << j << ',' << fmt(total) << ',' << fmt(total_sq) << ',' << fmt(auc) << '\n';
      }
      sens.push_back(mean_of(s));
      aucs.push_back(mean_of(a));
      csv << iter << ',' << fmt(sens.back()) << ',' << fmt(aucs.back()) << '\n';
    }
    write(out, "fig4a.csv", csv.str());
    write(out, "fig4a_testings.csv", detail.str());
    std::ostringstream trace;
    r.trace.write_csv(trace);
    write(out, "fig4a_trace.csv", trace.str());

    out.checks.push_back({"snapshots>=10", sens.size() >= 10, std::to_string(sens.size()) + " snapshots"});
    const double rho = spearman(sens, aucs);
    out.checks.push_back({"spearman<=-0.5", std::isfinite(rho) && rho <= -0.5, "rho " + fmt(rho)});
    return out;
  }

  // PCA of reward vectors under the trained policy vs random activation.
  FigureOutcome fig4bc() {
    FigureOutcome out{"fig4bc", {}, {}};
    const ExperimentConfig cfg = replicate(reward_, 0);
    const TrainResult& r = run(cfg);
    ExperimentConfig at = cfg;
    at.train.reward_fleet.contamination_rate = settings_.contamination_levels.back();
    at.eval.test_size = settings_.fig4bc_size;
    at.eval.test_anomaly_fraction = 0.1;
    const Fleet fleet = make_eval_fleet(at);
    const auto labels = evaluation_labels(fleet);

    EvalConfig e = cfg.eval.eval_config();
    const RolloutConfig rollout = eval_rollout(cfg.train.horizon, e);
    const auto trained = roll_out_fleet(fleet, r.policy, rollout);
    const auto random = roll_out_fleet(fleet, RandomPolicy(fleet.state_dim(), fleet.action_dim()), rollout);

    std::ostringstream csv;
    csv << "policy,system_id,label,pc1,pc2\n";
    struct Spread {
      double normal_pairwise = 0.0;
      double isolation_ratio = 0.0;
    };
    auto analyse = [&](const std::string& name, const std::vector<InteractionRecord>& recs) {
      const Pca2d pca = pca_2d(features_for(FeatureSpace::reward, recs, nullptr));
      std::ostringstream body;
      write_pca_csv(body, pca.projection, labels);
      std::string line;
      std::istringstream lines(body.str());
      std::getline(lines, line);
      while (std::getline(lines, line)) csv << name << ',' << line << '\n';

      std::vector<std::size_t> normals;
      std::vector<std::size_t> anomalies;
      for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? anomalies : normals).push_back(i);
      const auto& p = pca.projection;
      auto dist = [&](std::size_t i, double x, double y) { return std::hypot(p(i, 0) - x, p(i, 1) - y); };
      Spread s;
      double pairs = 0.0;
      for (std::size_t a = 0; a < normals.size(); ++a) {
        for (std::size_t b = a + 1; b < normals.size(); ++b) {
          s.normal_pairwise += dist(normals[a], p(normals[b], 0), p(normals[b], 1));
          pairs += 1.0;
        }
      }
      s.normal_pairwise /= pairs;
      double cx = 0.0;
      double cy = 0.0;
      for (std::size_t i : normals) {
        cx += p(i, 0);
        cy += p(i, 1);
      }
      cx /= static_cast<double>(normals.size());
      cy /= static_cast<double>(normals.size());
      double normal_radius = 0.0;
      for (std::size_t i : normals) normal_radius += dist(i, cx, cy);
      normal_radius /= static_cast<double>(normals.size());
      double anomaly_radius = 0.0;
      for (std::size_t i : anomalies) anomaly_radius += dist(i, cx, cy);
      anomaly_radius /= static_cast<double>(anomalies.size());
      s.isolation_ratio = anomaly_radius / std::max(normal_radius, 1e-300);
      return s;
    };
    const Spread ours = analyse("intersad_r", trained);
    const Spread base = analyse("random", random);
    write(out, "fig4bc.csv", csv.str());

    const double shrink = base.normal_pairwise / std::max(ours.normal_pairwise, 1e-300);
    out.checks.push_back({"normal_spread_shrink>=2", shrink >= 2.0,
                          "random " + fmt(base.normal_pairwise) + " / trained " + fmt(ours.normal_pairwise) +
                              " = " + fmt(shrink)});
    out.checks.push_back({"isolation_ratio_larger", ours.isolation_ratio > base.isolation_ratio,
                          "trained " + fmt(ours.isolation_ratio) + " vs random " + fmt(base.isolation_ratio)});
    return out;
  }

  // Ablations: full, no policy update, no replay.
  FigureOutcome fig5() {
    FigureOutcome out{"fig5", {}, {}};
    const std::vector<std::string> variants = {"full", "no_sen", "no_erm"};
    std::map<std::string, std::vector<double>> final_auc;
    std::ostringstream curves;
    curves << "variant,replicate,iteration,auc\n";
    for (const auto& v : variants) {
      for (std::size_t k = 0; k < settings_.seeds; ++k) {
        ExperimentConfig cfg = replicate(transition_, k);
        cfg.train.disable_sen = v == "no_sen";
        cfg.train.disable_erm = v == "no_erm";
        const TrainResult& r = run(cfg);
        const auto col = r.trace.column(FeatureSpace::trajectory, Scorer::iforest);
        for (const auto& row : r.trace.rows) {
          curves << v << ',' << k << ',' << row.iteration << ','
                 << (col ? fmt(row.auc[*col]) : std::string("nan")) << '\n';
        }
        EvalConfig e = cfg.eval.eval_config();
        e.space = FeatureSpace::trajectory;
        e.scorer = Scorer::iforest;
        final_auc[v].push_back(*evaluate(r.policy, r.embedder, make_eval_fleet(cfg), e).auc);
      }
    }
    write(out, "fig5.csv", curves.str());
    std::ostringstream fin;
    fin << "variant,auc_mean,auc_var\n";
    for (const auto& v : variants) fin << v << ',' << fmt(mean_of(final_auc[v])) << ',' << fmt(variance_of(final_auc[v])) << '\n';
    write(out, "fig5_final.csv", fin.str());

    const double full = mean_of(final_auc["full"]);
    const double no_sen = mean_of(final_auc["no_sen"]);
    const double no_erm = mean_of(final_auc["no_erm"]);
    const double var_full = variance_of(final_auc["full"]);
    const double var_no_erm = variance_of(final_auc["no_erm"]);
    out.checks.push_back({"full-no_sen>=0.05", full - no_sen >= 0.05, "gap " + fmt(full - no_sen)});
    out.checks.push_back({"no_erm_lower_or_2x_var", no_erm < full || var_no_erm >= 2.0 * var_full,
                          "mean " + fmt(no_erm) + " vs " + fmt(full) + ", var " + fmt(var_no_erm) + " vs " +
                              fmt(var_full)});
    return out;
  }

  // Observation noise at test time, trajectory vs embedding space.
  FigureOutcome fig6a() {
    FigureOutcome out{"fig6a", {}, {}};
    const auto& sigmas = settings_.noise_levels;
    std::vector<double> traj(sigmas.size(), 0.0);
    std::vector<double> emb(sigmas.size(), 0.0);
    for (std::size_t k = 0; k < settings_.seeds; ++k) {
      const ExperimentConfig cfg = replicate(transition_, k);
      const TrainResult& r = run(cfg);
      const Fleet test = make_eval_fleet(cfg);
      for (std::size_t i = 0; i < sigmas.size(); ++i) {
        EvalConfig e = cfg.eval.eval_config();
        e.scorer = Scorer::iforest;
        e.observation_noise = sigmas[i];
        e.space = FeatureSpace::trajectory;
        traj[i] += *evaluate(r.policy, r.embedder, test, e).auc / static_cast<double>(settings_.seeds);
        e.space = FeatureSpace::embedding;
        emb[i] += *evaluate(r.policy, r.embedder, test, e).auc / static_cast<double>(settings_.seeds);
      }
    }
    std::ostringstream csv;
    csv << "sigma,space,auc\n";
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      csv << fmt(sigmas[i]) << ",trajectory," << fmt(traj[i]) << '\n';
      csv << fmt(sigmas[i]) << ",embedding," << fmt(emb[i]) << '\n';
    }
    write(out, "fig6a.csv", csv.str());
    const std::size_t hi = static_cast<std::size_t>(
        std::max_element(sigmas.begin(), sigmas.end()) - sigmas.begin());
    const std::size_t lo = static_cast<std::size_t>(
        std::min_element(sigmas.begin(), sigmas.end()) - sigmas.begin());
    out.checks.push_back({"embedding>=trajectory@max_sigma", emb[hi] >= traj[hi],
                          "emb " + fmt(emb[hi]) + " vs traj " + fmt(traj[hi])});
    out.checks.push_back({"|diff|<0.05@sigma0", std::abs(emb[lo] - traj[lo]) < 0.05,
                          "emb " + fmt(emb[lo]) + " vs traj " + fmt(traj[lo])});
    return out;
  }

  FigureOutcome fig6b() {
    FigureOutcome out{"fig6b", {}, {}};
    const auto aucs = transition_sweep("D", settings_.embedding_dims, settings_.sweep_seeds);
    std::ostringstream csv;
    csv << "D,auc\n";
    for (std::size_t i = 0; i < aucs.size(); ++i) csv << fmt(settings_.embedding_dims[i]) << ',' << fmt(aucs[i]) << '\n';
    write(out, "fig6b.csv", csv.str());
    return out;
  }

  FigureOutcome fig6c() {
    FigureOutcome out{"fig6c", {}, {}};
    const auto& ts = settings_.horizons;
    const auto aucs = transition_sweep("T", ts, settings_.sweep_seeds);
    std::ostringstream csv;
    csv << "T,auc\n";
    for (std::size_t i = 0; i < aucs.size(); ++i) csv << fmt(ts[i]) << ',' << fmt(aucs[i]) << '\n';
    write(out, "fig6c.csv", csv.str());

    auto at = [&](double t) -> std::optional<double> {
      for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i] == t) return aucs[i];
      }
      return std::nullopt;
    };
    const auto t2 = at(2);
    const auto t10 = at(10);
    out.checks.push_back({"auc(T=10)>auc(T=2)", t2 && t10 && *t10 > *t2,
                          t2 && t10 ? fmt(*t10) + " vs " + fmt(*t2) : std::string("T=2 or T=10 not swept")});
    bool all = true;
    std::string detail;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (ts[i] > 4) {
        all = all && aucs[i] >= 0.9;
        detail += (detail.empty() ? "" : " ") + ("T=" + fmt(ts[i]) + ":" + fmt(aucs[i]));
      }
    }
    out.checks.push_back({"auc>=0.9_for_T>4", all, detail});
    return out;
  }

  // Mean test AUC (iforest, trajectory space) of InterSAD-T per value of a
  // transition hyperparameter over `seeds` replicates.
  std::vector<double> transition_sweep(const std::string& param, const std::vector<double>& values,
                                       std::size_t seeds) {
    std::vector<double> out;
    for (double v : values) {
      double acc = 0.0;
      for (std::size_t k = 0; k < seeds; ++k) {
        ExperimentConfig cfg = replicate(transition_, k);
        apply_sweep_value(cfg, param, v);
        const TrainResult& r = run(cfg);
        EvalConfig e = cfg.eval.eval_config();
        e.space = FeatureSpace::trajectory;
        e.scorer = Scorer::iforest;
        acc += *evaluate(r.policy, r.embedder, make_eval_fleet(cfg), e).auc;
      }
      out.push_back(acc / static_cast<double>(seeds));
    }
    return out;
  }

  static void apply_sweep_value(ExperimentConfig& cfg, const std::string& param, double v) {
    auto as_size = [&](const char* what) {
      require(v >= 1 && v == std::floor(v), std::string(what) + " sweep values must be positive integers");
      return static_cast<std::size_t>(v);
    };
    if (param == "D") {
      cfg.train.embedding_dim = as_size("D");
    } else if (param == "T") {
      cfg.train.horizon = as_size("T");
    } else if (param == "sigma") {
      require(v >= 0.0, "sigma sweep values must be nonnegative");
      cfg.eval.observation_noise = v;
    } else {
      throw ContractViolation("unknown sweep parameter '" + param + "' (expected D, T, sigma)");
    }
  }

 private:
  void write(FigureOutcome& out, const std::string& name, const std::string& body) const {
    const auto path = out_ / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << body;
    out.files.push_back(path.string());
  }

  static std::string runs_csv(std::map<std::string, std::vector<double>>& auc,
                              const std::vector<std::string>& order) {
    std::ostringstream s;
    s << "detector,replicate,auc\n";
    for (const auto& d : order) {
      for (std::size_t k = 0; k < auc[d].size(); ++k) s << d << ',' << k << ',' << fmt(auc[d][k]) << '\n';
    }
    return s.str();
  }

  ExperimentConfig transition_;
  ExperimentConfig reward_;
  std::uint64_t seed_;
  std::filesystem::path out_;
  SuiteSettings settings_;
  std::map<std::string, std::unique_ptr<TrainResult>> cache_;
};

// One train + eval per value of `param` from a base config. The sigma sweep
// varies only test-time noise, so its single training run is shared.
struct SweepRow {
  double value = 0.0;
  double auc = 0.0;
  std::optional<double> auc_embedding;
};

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::string& param,
                                       const std::vector<double>& values) {
  require(!values.empty(), "sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (double v : values) {
    ExperimentConfig cfg = base;
    ExperimentSuite::apply_sweep_value(cfg, param, v);
    const TrainResult r = train(cfg.train);
    const Fleet test = make_eval_fleet(cfg);
    EvalConfig e = cfg.eval.eval_config();
    SweepRow row;
    row.value = v;
    if (param == "sigma") {
      e.space = FeatureSpace::trajectory;
      row.auc = *evaluate(r.policy, r.embedder, test, e).auc;
      if (cfg.train.mode == Mode::transition) {
        e.space = FeatureSpace::embedding;
        row.auc_embedding = *evaluate(r.policy, r.embedder, test, e).auc;
      }
    } else {
      row.auc = *evaluate(r.policy, r.embedder, test, e).auc;
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::string& param, std::span<const SweepRow> rows) {
  const bool two = !rows.empty() && rows.front().auc_embedding.has_value();
  out << (two ? "param,value,auc_trajectory,auc_embedding\n" : "param,value,auc\n");
  for (const auto& r : rows) {
    out << param << ',' << fmt(r.value) << ',' << fmt(r.auc);
    if (two) out << ',' << fmt(*r.auc_embedding);
    out << '\n';
  }
}

}  // namespace intersad
