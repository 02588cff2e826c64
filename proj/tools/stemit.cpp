// SPDX-License-Identifier: Apache-2.0
//
// stemit <gen|sync|train|ablate|gradcheck> [flags]

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "stemit/commands.hpp"

namespace {

void add_train_flags(CLI::App* cmd, stemit::cli::TrainOptions& t) {
  cmd->add_option("--config", t.config, "experiment config (JSON)");
  cmd->add_option("--data", t.data, "records (JSONL)")->required();
  cmd->add_option("--splits", t.splits, "split manifest; derived from the config when omitted");
  cmd->add_option("--out", t.out, "output directory");
  cmd->add_option("--features", t.features, "physical features, e.g. smb+refreeze+melt, or none");
  cmd->add_flag("--no-timing", t.no_timing, "write 0 in the seconds column so reports are byte-reproducible");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = stemit::cli;
  CLI::App app{"Knowledge-informed spatio-temporal GNN for layer-thickness prediction"};
  app.require_subcommand(1);

  cli::GenOptions gen;
  std::optional<std::uint64_t> gen_seed;
  auto* g = app.add_subcommand("gen", "generate a synthetic dataset and split manifest");
  g->add_option("--config", gen.config, "experiment config (JSON)");
  g->add_option("--out", gen.out, "output directory");
  g->add_option("--seed", gen_seed, "dataset seed (overrides data.seed)");
  g->add_flag("--grid", gen.grid, "also write a synthetic climate grid (grid.json)");

  cli::SyncOptions sync;
  std::string sync_fields;
  auto* s = app.add_subcommand("sync", "attach gridded climate features to records");
  s->add_option("--grid", sync.grid, "climate grid (JSON, annual or daily)")->required();
  s->add_option("--records", sync.records, "records (JSONL)")->required();
  s->add_option("--out", sync.out, "output records (JSONL)")->required();
  s->add_option("--fields", sync_fields, "comma-separated fields; default all grid fields");
  s->add_option("--boundary-month", sync.boundary_month, "first month of the annual window for daily grids")
      ->check(CLI::Range(1, 12));

  cli::TrainOptions tr;
  std::optional<std::size_t> tr_trials, tr_epochs;
  auto* t = app.add_subcommand("train", "train and evaluate one variant over K trials");
  add_train_flags(t, tr);
  t->add_option("--variant", tr.variant, "branch combination, e.g. sage+temp or gcn+sage+temp:clamp");
  t->add_option("--trials", tr_trials, "number of trials K");
  t->add_option("--epochs", tr_epochs, "training epochs");

  cli::AblateOptions ab;
  std::optional<std::size_t> ab_trials, ab_epochs;
  auto* a = app.add_subcommand("ablate", "train several variants / feature sets and compare");
  add_train_flags(a, ab.base);
  a->add_option("--variants", ab.variants, "comma-separated variants")->required();
  a->add_option("--feature-sets", ab.feature_sets, "comma-separated feature sets; '+x' extends the first");
  a->add_option("--trials", ab_trials, "number of trials K");
  a->add_option("--epochs", ab_epochs, "training epochs");

  cli::GradcheckOptions gc;
  auto* c = app.add_subcommand("gradcheck", "finite-difference check of every op and the full model");
  c->add_option("--seed", gc.seed, "random seed");
  c->add_option("--tol", gc.tol, "maximum relative error");
  c->add_option("--step", gc.h, "central-difference step h");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kConfigError;
  }

  if (*g) {
    gen.seed = gen_seed;
    return cli::cmd_gen(gen);
  }
  if (*s) {
    sync.fields = cli::split(sync_fields, ',');
    return cli::cmd_sync(sync);
  }
  if (*t) {
    tr.trials = tr_trials;
    tr.epochs = tr_epochs;
    return cli::cmd_train(tr);
  }
  if (*a) {
    ab.base.trials = ab_trials;
    ab.base.epochs = ab_epochs;
    return cli::cmd_ablate(ab);
  }
  return cli::cmd_gradcheck(gc);
}
