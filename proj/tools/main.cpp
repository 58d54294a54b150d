#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "temporal_heads/harness.hpp"

namespace th = temporal_heads;

int main(int argc, char** argv) {
  CLI::App app{"temporal-heads: temporal fusion heads over per-frame feature matrices"};
  app.require_subcommand(1);

  th::SynthOptions synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic order-sensitive dataset");
  synth_cmd->add_option("--config", synth.config_path, "synth spec JSON (defaults when omitted)");
  synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();
  auto* synth_seed = synth_cmd->add_option("--seed", synth.seed, "override the spec seed");

  th::TrainOptions train;
  CLI::App* train_cmd = app.add_subcommand("train", "fit one model configuration");
  train_cmd->add_option("--config", train.config_path, "model + train config JSON")->required();
  train_cmd->add_option("--dataset", train.dataset_path, "dataset manifest JSON")->required();
  train_cmd->add_option("--out", train.out_dir, "output directory for report and checkpoint");
  auto* train_seed = train_cmd->add_option("--seed", train.seed, "override the config seed");

  th::EvalOptions eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval.checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--dataset", eval.dataset_path, "dataset manifest JSON")->required();
  eval_cmd->add_option("--out", eval.out_dir, "output directory for eval.json");

  th::GradcheckOptions gradcheck;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check catalog variants");
  gc_cmd->add_flag("--all", gradcheck.all, "check both catalogs");
  gc_cmd->add_option("--family", gradcheck.family, "tslstm or tconv");
  gc_cmd->add_flag("--small", gradcheck.small, "reduced dimensions for CI");
  gc_cmd->add_option("--seed", gradcheck.seed, "seed for inputs and initialization");
  gc_cmd->add_option("--tolerance", gradcheck.tolerance, "max relative error");

  th::AblateOptions ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "train a catalog and emit a ranked table");
  ablate_cmd->add_option("--family", ablate.family, "tslstm, tconv, or all");
  ablate_cmd->add_option("--dataset", ablate.dataset_path, "dataset manifest JSON")->required();
  ablate_cmd->add_option("--out", ablate.out_dir, "output directory for tables");
  ablate_cmd->add_option("--jobs", ablate.jobs, "concurrent variants");
  ablate_cmd->add_flag("--small", ablate.small, "reduced dimensions for CI");
  ablate_cmd->add_option("--seed", ablate.seed, "base seed");
  ablate_cmd->add_option("--epochs", ablate.epochs, "training epochs per variant");
  ablate_cmd->add_option("--frames", ablate.frames, "frames sampled per sequence");

  th::BaselineOptions baseline;
  CLI::App* base_cmd =
      app.add_subcommand("baseline", "frame-level classifier with prediction averaging");
  base_cmd->add_option("--dataset", baseline.dataset_path, "dataset manifest JSON")->required();
  base_cmd->add_option("--out", baseline.out_dir, "output directory for baseline.json");
  base_cmd->add_option("--seed", baseline.seed, "seed");
  base_cmd->add_option("--epochs", baseline.epochs, "training epochs");
  base_cmd->add_option("--frames", baseline.frames, "frames sampled per sequence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*synth_cmd) {
      synth.has_seed = synth_seed->count() > 0;
      return th::run_synth(synth);
    }
    if (*train_cmd) {
      train.has_seed = train_seed->count() > 0;
      return th::run_train(train);
    }
    if (*eval_cmd) return th::run_eval(eval);
    if (*gc_cmd) return th::run_gradcheck(gradcheck);
    if (*ablate_cmd) return th::run_ablate(ablate);
    if (*base_cmd) return th::run_baseline(baseline);
  } catch (const th::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
