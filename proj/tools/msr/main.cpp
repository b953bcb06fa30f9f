#include <CLI11.hpp>

#include "cli_util.hpp"

namespace {

void add_common(CLI::App* cmd, msr::cli::CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "run configuration JSON");
  cmd->add_option("--seed", [&opts](const std::vector<std::string>& vals) {
        opts.seed = std::stoull(vals.front());
        return true;
      }, "global seed (overrides the config)")->expected(1);
  cmd->add_option("--jobs", opts.jobs, "worker threads for track-level parallelism")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", opts.out_dir, "output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"music source restoration pipeline"};
  app.require_subcommand(1);

  msr::cli::SynthesizeArgs synth;
  auto* c_synth = app.add_subcommand("synthesize",
      "degrade stems per track and master them into training mixtures");
  c_synth->add_option("--manifest", synth.manifest, "track manifest (JSONL)")->required();
  add_common(c_synth, synth.common);

  msr::cli::SeparateArgs sepa;
  auto* c_sep = app.add_subcommand("separate", "run the separator on mixtures");
  c_sep->add_option("--checkpoint", sepa.checkpoint, "separator checkpoint")->required();
  c_sep->add_option("inputs", sepa.inputs, "mixture wav files or directories")->required();
  add_common(c_sep, sepa.common);

  msr::cli::SurgeryArgs surg;
  auto* c_surg = app.add_subcommand("surgery",
      "checkpoint surgery: lora-merge or expand-heads");
  c_surg->add_option("subcommand", surg.subcommand, "lora-merge | expand-heads")->required();
  c_surg->add_option("--in", surg.input_checkpoint, "input checkpoint")->required();
  c_surg->add_option("--out-checkpoint", surg.output_checkpoint, "output checkpoint")->required();
  c_surg->add_option("--stems", surg.new_stems,
                     "new stems for expand-heads (default: the five missing instruments)");
  add_common(c_surg, surg.common);

  msr::cli::TrainStage3Args train;
  auto* c_train = app.add_subcommand("train-stage3",
      "train the new mask heads; the backbone stays frozen");
  c_train->add_option("--mixtures", train.mixtures_manifest, "mixtures manifest (JSONL)")->required();
  c_train->add_option("--targets", train.targets_manifest, "target-stem manifest (JSONL)")->required();
  c_train->add_option("--in", train.input_checkpoint, "input 9-head checkpoint")->required();
  c_train->add_option("--out-checkpoint", train.output_checkpoint, "trained checkpoint")->required();
  c_train->add_option("--steps", train.steps_override, "step count (overrides config)");
  c_train->add_option("--lr", train.lr_override, "learning rate (overrides config)");
  add_common(c_train, train.common);

  msr::cli::RestoreArgs rest;
  auto* c_rest = app.add_subcommand("restore", "restore separated stems via routed experts");
  c_rest->add_option("--registry", rest.registry_dir, "expert registry directory")->required();
  c_rest->add_option("inputs", rest.inputs, "stem wav files or directories")->required();
  add_common(c_rest, rest.common);

  msr::cli::PairsArgs pairs;
  auto* c_pairs = app.add_subcommand("pairs",
      "generate (separated estimate, clean stem) excerpt pairs");
  c_pairs->add_option("--manifest", pairs.manifest, "clean-stem track manifest")->required();
  c_pairs->add_option("--checkpoint", pairs.checkpoint, "separator checkpoint")->required();
  add_common(c_pairs, pairs.common);

  msr::cli::EvaluateArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "per-stem metrics and report files");
  c_eval->add_option("--estimates", eval.estimates_dir, "directory of estimate wavs")->required();
  c_eval->add_option("--references", eval.references_dir, "directory of reference wavs")->required();
  c_eval->add_option("--passthrough", eval.passthrough_path,
                     "JSON with externally computed per-stem metrics (e.g. fad, zimt)");
  add_common(c_eval, eval.common);

  CLI11_PARSE(app, argc, argv);

  using msr::cli::run_guarded;
  if (c_synth->parsed()) return run_guarded([&] { msr::cli::cmd_synthesize(synth); });
  if (c_sep->parsed()) return run_guarded([&] { msr::cli::cmd_separate(sepa); });
  if (c_surg->parsed()) return run_guarded([&] { msr::cli::cmd_surgery(surg); });
  if (c_train->parsed()) return run_guarded([&] { msr::cli::cmd_train_stage3(train); });
  if (c_rest->parsed()) return run_guarded([&] { msr::cli::cmd_restore(rest); });
  if (c_pairs->parsed()) return run_guarded([&] { msr::cli::cmd_pairs(pairs); });
  if (c_eval->parsed()) return run_guarded([&] { msr::cli::cmd_evaluate(eval); });
  return msr::cli::kExitUsage;
}
