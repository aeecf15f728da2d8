// Command-line front end: asr synth|train|eval|render.
#include <iostream>

#include <CLI11.hpp>

#include "asr/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Attend-infer-repeat models with scene constraints"};
  app.require_subcommand(1);
  app.set_version_flag("--version", asr::code_version());

  asr::CommandArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "Run configuration file")->required();
    sub->add_option("--set", args.overrides, "Override a configuration key (key=value)");
    sub->add_option("--out", args.out_dir, "Output directory")->required();
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate the train and test datasets");
  add_common(synth);

  CLI::App* train = app.add_subcommand("train", "Train a model");
  add_common(train);
  train->add_option("--dataset", args.dataset, "Held-out dataset archive");
  train->add_flag("--resume", args.resume, "Continue from checkpoint_last.ckpt in the output directory");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", args.checkpoint, "Checkpoint file")->required();
  eval->add_option("--dataset", args.dataset, "Dataset archive");

  CLI::App* render = app.add_subcommand("render", "Render a grid of images with box overlays");
  add_common(render);
  render->add_option("--checkpoint", args.checkpoint, "Checkpoint file");
  render->add_option("--dataset", args.dataset, "Dataset archive");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) asr::cmd_synth(args, std::cout);
    else if (*train) asr::cmd_train(args, std::cout);
    else if (*eval) asr::cmd_eval(args, std::cout);
    else asr::cmd_render(args, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return asr::exit_code_for(e);
  }
  return 0;
}
