// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stemit/checkpoint.hpp"
#include "stemit/climate.hpp"
#include "stemit/config.hpp"
#include "stemit/error.hpp"
#include "stemit/gradsuite.hpp"
#include "stemit/jsonl.hpp"
#include "stemit/metrics.hpp"
#include "stemit/sample.hpp"
#include "stemit/splits.hpp"
#include "stemit/synth.hpp"
#include "stemit/trainer.hpp"

namespace stemit::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2, kIoError = 3 };

/// Runs `body`, mapping library exceptions onto the exit-code contract.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest decimal text that reads back to the same double.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

using CsvRow = std::vector<std::string>;

inline void write_csv(const fs::path& path, const CsvRow& header, const std::vector<CsvRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  auto line = [&out](const CsvRow& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv_field(r[i]);
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) {
    const auto b = tok.find_first_not_of(" \t"), e = tok.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(tok.substr(b, e - b + 1));
  }
  return out;
}

inline std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

inline cfg::ExperimentConfig load_config(const std::string& path) {
  return path.empty() ? cfg::ExperimentConfig{} : cfg::load(path);
}

// ---------------------------------------------------------------------------
// gen

/// Annual grid over the records' bounding box whose fields vary smoothly in
/// space and year. Used to exercise the synchronization step end to end.
inline clim::AnnualField synthetic_grid(const std::vector<graph::LayerSequenceRecord>& records, std::uint64_t seed) {
  double lat0 = 90, lat1 = -90, lon0 = 180, lon1 = -180;
  std::vector<int> years;
  for (const auto& r : records) {
    for (double v : r.lat) lat0 = std::min(lat0, v), lat1 = std::max(lat1, v);
    for (double v : r.lon) lon0 = std::min(lon0, v), lon1 = std::max(lon1, v);
    for (int y : r.years)
      if (std::find(years.begin(), years.end(), y) == years.end()) years.push_back(y);
  }
  if (records.empty()) throw ContractError("synthetic_grid: no records");
  std::sort(years.rbegin(), years.rend());
  clim::AnnualField f;
  f.years = years;
  for (double lat = std::floor(lat0) - 1; lat <= std::ceil(lat1) + 1; lat += 1.0)
    for (double lon = std::floor(lon0) - 2; lon <= std::ceil(lon1) + 2; lon += 2.0) f.points.push_back({lon, lat});
  SeededRng rng(derive_seed(seed, 0x67));
  struct Shape {
    double base, gx, gy, gt;
  };
  const std::vector<std::pair<std::string, Shape>> shapes = {
      {"smb", {350, 4, -6, 15}},   {"refreeze", {0.15, 0.002, 0.001, 0.01}},
      {"melt", {0.4, -0.01, 0.02, 0.03}}, {"temp", {255, 0.1, -0.4, 0.5}},
      {"snowpack", {1.2, 0.01, 0.02, 0.05}}};
  for (const auto& [name, s] : shapes) {
    const double phase = rng.uniform(0.0, 6.283185307179586);
    auto& per_year = f.values[name];
    for (int y : years) {
      std::vector<double> row;
      for (const auto& p : f.points)
        row.push_back(s.base + s.gx * (p.x + 40.0) + s.gy * (p.y - 72.0) +
                      s.gt * std::sin(0.9 * (y - 2000) + phase + 0.2 * p.x));
      per_year.push_back(std::move(row));
    }
  }
  return f;
}

struct GenOptions {
  std::string config;
  std::string out = "data";
  std::optional<std::uint64_t> seed;
  bool grid = false;  // also write a synthetic climate grid
};

inline int cmd_gen(const GenOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    cfg::ExperimentConfig c = load_config(o.config);
    if (o.seed) c.data.seed = *o.seed;
    const auto records = graph::synth_generate(c.data.synth, c.data.seed);
    const std::size_t min_layers = c.data.m + c.data.n;
    const auto kept = graph::filter_complete(records, min_layers);
    const fs::path dir(o.out);
    ensure_dir(dir);
    graph::write_jsonl(records, (dir / "records.jsonl").string());
    if (kept.size() >= 5) {
      const auto splits = graph::make_splits(kept.size(), c.train.trials, c.data.fractions, c.data.split_seed);
      graph::write_manifest(splits, (dir / "manifest.json").string());
    } else {
      err << "warning: only " << kept.size() << " complete records; no split manifest written\n";
    }
    if (o.grid) clim::write_grid(synthetic_grid(records, c.data.seed), (dir / "grid.json").string());
    out << "records: " << records.size() << '\n'
        << "complete (>= " << min_layers << " layers): " << kept.size() << '\n'
        << "dropped: " << records.size() - kept.size() << '\n';
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// sync

struct SyncOptions {
  std::string grid;
  std::string records;
  std::string out;
  std::vector<std::string> fields;  // empty: every field the grid has
  unsigned boundary_month = 9;
};

inline int cmd_sync(const SyncOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const clim::AnnualField grid = clim::read_grid(o.grid, o.boundary_month);
    auto records = graph::read_jsonl(o.records);
    std::vector<std::string> fields = o.fields;
    if (fields.empty())
      for (const auto& [name, _] : grid.values) fields.push_back(name);
    for (const auto& f : fields)
      if (!graph::is_phys_field(f)) throw ConfigError("sync: unknown field '" + f + "'");
    records = clim::attach_features(std::move(records), grid, fields);
    for (const auto& r : records) graph::validate(r);
    if (fs::path(o.out).has_parent_path()) ensure_dir(fs::path(o.out).parent_path());
    graph::write_jsonl(records, o.out);
    out << "synchronized " << records.size() << " records: " << join(fields, ", ") << '\n';
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// train

struct TrialOutcome {
  int k = 0;
  train::ErrorMetrics test;
  train::ErrorMetrics baseline;
  std::vector<double> rel_mae;
  double seconds = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  bool alpha_positive = true;
  std::size_t best_epoch = 0;
};

struct ExperimentOutcome {
  std::string variant;
  std::string features;
  bool uses_alpha = false;
  bool uses_beta = false;
  std::vector<TrialOutcome> trials;
  train::MeanStd rmse, mae, seconds, alpha, beta, baseline_rmse;
  std::vector<train::MeanStd> layers;
};

inline std::string feature_label(const model::BranchConfig& m) {
  return m.use_phys && !m.features.empty() ? join(m.features, "+") : "none";
}

inline std::vector<graph::GraphSample> build_samples(const std::vector<graph::LayerSequenceRecord>& records,
                                                     const cfg::ExperimentConfig& c) {
  std::vector<graph::GraphSample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(graph::make_sample(r, c.data.m, c.data.n, c.model.phys(), c.data.edges));
  return out;
}

/// Trains and evaluates one configuration on every trial split. With a
/// non-empty `out_dir`, writes per-trial checkpoints and histories plus the
/// report and per-layer CSVs.
inline ExperimentOutcome run_experiment(const cfg::ExperimentConfig& c,
                                        const std::vector<graph::LayerSequenceRecord>& all_records,
                                        const graph::SplitSpec* given_splits, const std::string& out_dir,
                                        std::ostream& out) {
  c.validate();
  const auto records = graph::filter_complete(all_records, c.data.m + c.data.n);
  if (records.size() < all_records.size())
    out << "filtered " << all_records.size() - records.size() << " incomplete records\n";
  const auto samples = build_samples(records, c);
  const graph::SplitSpec splits = given_splits
                                      ? *given_splits
                                      : graph::make_splits(samples.size(), c.train.trials, c.data.fractions,
                                                           c.data.split_seed);
  if (splits.trials.size() < c.train.trials)
    throw ConfigError("split manifest holds " + std::to_string(splits.trials.size()) + " trials, " +
                      std::to_string(c.train.trials) + " requested");

  ExperimentOutcome res;
  res.variant = c.model.variant();
  res.features = feature_label(c.model);
  res.uses_alpha = c.model.uses_alpha();
  res.uses_beta = c.model.uses_beta();
  const fs::path dir(out_dir);
  if (!out_dir.empty()) ensure_dir(dir);

  for (std::size_t ti = 0; ti < c.train.trials; ++ti) {
    const graph::Trial& trial = splits.trials[ti];
    for (const auto* part : {&trial.train, &trial.val, &trial.test})
      for (std::size_t i : *part)
        if (i >= samples.size()) throw DataError("split index " + std::to_string(i) + " out of range");
    train::TrainConfig tc = c.train;
    tc.seed = derive_seed(c.train.seed, static_cast<std::uint64_t>(trial.k));
    train::TrainResult r = train::train(samples, trial.train, trial.val, tc, c.model);

    TrialOutcome t;
    t.k = trial.k;
    t.test = train::evaluate(r.best, samples, trial.test);
    t.rel_mae = train::relative_mae_per_layer(r.best, samples, trial.test);
    t.baseline = train::LayerMeanBaseline::fit(samples, trial.train).evaluate(samples, trial.test);
    t.seconds = c.record_time ? r.seconds : 0.0;
    t.alpha = r.final_alpha;
    t.beta = r.final_beta;
    t.alpha_positive = r.alpha_positive;
    t.best_epoch = r.best_epoch;
    out << res.variant << " [" << res.features << "] trial " << t.k << ": rmse " << fmt(t.test.rmse) << " mae "
        << fmt(t.test.mae) << " (baseline rmse " << fmt(t.baseline.rmse) << ", best epoch " << t.best_epoch << ")";
    if (res.uses_alpha) out << " alpha " << fmt(t.alpha) << (t.alpha_positive ? " > 0" : " <= 0");
    if (res.uses_beta) out << " beta " << fmt(t.beta);
    out << '\n';

    if (!out_dir.empty()) {
      const fs::path tdir = dir / ("trial_" + std::to_string(t.k));
      ensure_dir(tdir);
      io::write_checkpoint({r.best, tc, t.k, r.best_epoch, r.best_val_rmse}, (tdir / "checkpoint.json").string());
      std::vector<CsvRow> rows;
      for (const auto& h : r.history)
        rows.push_back({std::to_string(h.epoch), fmt(h.lr), fmt(h.train_loss), fmt(h.val_loss),
                        res.uses_alpha ? fmt(h.alpha) : "", res.uses_beta ? fmt(h.beta) : ""});
      write_csv(tdir / "history.csv", {"epoch", "lr", "train_loss", "val_loss", "alpha", "beta"}, rows);
    }
    res.trials.push_back(std::move(t));
  }

  auto column = [&res](auto get) {
    std::vector<double> v;
    for (const auto& t : res.trials) v.push_back(get(t));
    return train::aggregate_trials(v);
  };
  res.rmse = column([](const TrialOutcome& t) { return t.test.rmse; });
  res.mae = column([](const TrialOutcome& t) { return t.test.mae; });
  res.seconds = column([](const TrialOutcome& t) { return t.seconds; });
  res.alpha = column([](const TrialOutcome& t) { return t.alpha; });
  res.beta = column([](const TrialOutcome& t) { return t.beta; });
  res.baseline_rmse = column([](const TrialOutcome& t) { return t.baseline.rmse; });
  std::vector<std::vector<double>> rel;
  for (const auto& t : res.trials) rel.push_back(t.rel_mae);
  res.layers = train::aggregate_layers(rel);

  if (!out_dir.empty()) {
    std::vector<CsvRow> rows;
    auto ab = [&res](double a, double b) {
      return std::pair{res.uses_alpha ? fmt(a) : std::string(), res.uses_beta ? fmt(b) : std::string()};
    };
    for (const auto& t : res.trials) {
      auto [a, b] = ab(t.alpha, t.beta);
      rows.push_back({res.variant, std::to_string(t.k), fmt(t.test.rmse), fmt(t.test.mae), fmt(t.seconds), a, b});
    }
    {
      auto [a, b] = ab(res.alpha.mean, res.beta.mean);
      rows.push_back({res.variant, "mean", fmt(res.rmse.mean), fmt(res.mae.mean), fmt(res.seconds.mean), a, b});
    }
    {
      auto [a, b] = ab(res.alpha.std, res.beta.std);
      rows.push_back({res.variant, "std", fmt(res.rmse.std), fmt(res.mae.std), fmt(res.seconds.std), a, b});
    }
    write_csv(dir / "report.csv", {"variant", "trial", "rmse", "mae", "seconds", "alpha", "beta"}, rows);
    std::vector<CsvRow> lrows;
    for (std::size_t j = 0; j < res.layers.size(); ++j)
      lrows.push_back({std::to_string(j + 1), fmt(res.layers[j].mean), fmt(res.layers[j].std)});
    write_csv(dir / "layers.csv", {"layer_index", "rel_mae_mean", "rel_mae_std"}, lrows);
  }
  out << res.variant << " [" << res.features << "]: rmse " << fmt(res.rmse.mean) << " +- " << fmt(res.rmse.std)
      << ", mae " << fmt(res.mae.mean) << " +- " << fmt(res.mae.std) << '\n';
  return res;
}

struct TrainOptions {
  std::string config;
  std::string data;
  std::string splits;  // optional manifest; default derives splits from the config
  std::string variant;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> epochs;
  std::string features;  // "a+b+c" or "none"; empty keeps the config
  std::string out = "runs/train";
  bool no_timing = false;
};

inline void apply_features(model::BranchConfig& m, const std::string& spec) {
  if (spec.empty()) return;
  if (spec == "none") {
    m.use_phys = false;
    return;
  }
  m.use_phys = true;
  m.features = split(spec, '+');
  if (m.features.empty()) throw ConfigError("empty feature list '" + spec + "'");
}

inline cfg::ExperimentConfig train_config(const TrainOptions& o) {
  cfg::ExperimentConfig c = load_config(o.config);
  if (!o.variant.empty()) c.model.set_variant(o.variant);
  if (o.trials) c.train.trials = *o.trials;
  if (o.epochs) c.train.epochs = *o.epochs;
  apply_features(c.model, o.features);
  if (o.no_timing) c.record_time = false;
  c.validate();
  return c;
}

inline int cmd_train(const TrainOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const cfg::ExperimentConfig c = train_config(o);
    const auto records = graph::read_jsonl(o.data);
    std::optional<graph::SplitSpec> splits;
    if (!o.splits.empty()) splits = graph::read_manifest(o.splits);
    run_experiment(c, records, splits ? &*splits : nullptr, o.out, out);
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOptions {
  TrainOptions base;
  std::string variants;      // comma-separated
  std::string feature_sets;  // comma-separated; "+x" entries extend the first set
};

/// Expands "smb+refreeze+melt,+temp,+snowpack" into full feature lists.
inline std::vector<std::string> expand_feature_sets(const std::string& spec) {
  std::vector<std::string> out;
  std::string first;
  for (const auto& s : split(spec, ',')) {
    if (s.front() == '+') {
      if (first.empty()) throw ConfigError("feature set '" + s + "' extends nothing");
      out.push_back(first + s);
    } else {
      out.push_back(s);
      if (first.empty()) first = s;
    }
  }
  return out;
}

inline std::string group_name(const std::string& variant, const std::string& features) {
  std::string g = variant + "__" + features;
  for (char& ch : g)
    if (ch == ':' || ch == '+') ch = ch == ':' ? '-' : '_';
  return g;
}

inline int cmd_ablate(const AblateOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto variants = split(o.variants, ',');
    if (variants.empty()) throw ConfigError("ablate: empty variant list");
    std::vector<std::string> feature_sets = expand_feature_sets(o.feature_sets);
    if (feature_sets.empty()) feature_sets.push_back(o.base.features);
    const auto records = graph::read_jsonl(o.base.data);
    std::optional<graph::SplitSpec> splits;
    if (!o.base.splits.empty()) splits = graph::read_manifest(o.base.splits);

    // Validate every group before spending time on training.
    std::vector<cfg::ExperimentConfig> configs;
    for (const auto& fset : feature_sets)
      for (const auto& v : variants) {
        TrainOptions t = o.base;
        t.variant = v;
        t.features = fset;
        configs.push_back(train_config(t));
      }
    const fs::path dir(o.base.out);
    ensure_dir(dir);
    std::vector<ExperimentOutcome> results;
    for (const auto& c : configs) {
      const std::string g = group_name(c.model.variant(), feature_label(c.model));
      results.push_back(run_experiment(c, records, splits ? &*splits : nullptr, (dir / g).string(), out));
    }
    std::vector<std::size_t> order(results.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return results[a].rmse.mean < results[b].rmse.mean; });
    std::vector<CsvRow> rows;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const auto& r = results[order[rank]];
      rows.push_back({std::to_string(rank + 1), r.variant, r.features, std::to_string(r.trials.size()),
                      fmt(r.rmse.mean), fmt(r.rmse.std), fmt(r.mae.mean), fmt(r.mae.std), fmt(r.seconds.mean),
                      r.uses_alpha ? fmt(r.alpha.mean) : "", r.uses_beta ? fmt(r.beta.mean) : ""});
    }
    write_csv(dir / "comparison.csv",
              {"rank", "variant", "features", "trials", "rmse_mean", "rmse_std", "mae_mean", "mae_std",
               "seconds_mean", "alpha_mean", "beta_mean"},
              rows);
    out << "wrote " << rows.size() << " groups to " << (dir / "comparison.csv").string() << '\n';
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOptions {
  std::uint64_t seed = 0;
  double tol = 1e-4;
  double h = 1e-5;
};

inline int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    if (!(o.tol > 0)) throw ConfigError("gradcheck: tol must be positive");
    if (!(o.h > 0)) throw ConfigError("gradcheck: h must be positive");
    const auto reports = model::gradient_suite({o.seed, o.h, o.tol});
    bool ok = true;
    for (const auto& r : reports) {
      out << (r.passed ? "PASS " : "FAIL ") << r.name << "  max_rel_error=" << fmt(r.max_rel_error)
          << "  coords=" << r.checked;
      if (!r.passed)
        out << "  worst=" << r.worst_param << "[" << r.worst_index << "] analytic=" << fmt(r.worst_analytic)
            << " numeric=" << fmt(r.worst_numeric);
      out << '\n';
      ok = ok && r.passed;
    }
    out << (ok ? "all " : "failures in ") << reports.size() << " checks, tol " << fmt(o.tol) << '\n';
    return ok ? kOk : kCheckFailed;
  });
}

}  // namespace stemit::cli
