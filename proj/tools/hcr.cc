// hcr: command-line driver for the mortality pipeline.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "hcr/common/alloc.h"
#include "hcr/common/error.h"
#include "hcr/pipeline/pipeline.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitRuntime = 4;

int ExitCode(hcr::ErrorKind kind) {
  switch (kind) {
    case hcr::ErrorKind::kConfig: return kExitConfig;
    case hcr::ErrorKind::kMissingArtifact: return kExitMissing;
    default: return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  hcr::TuneAllocator();
  CLI::App app{"Hierarchical CNN-RNN in-hospital mortality pipeline"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::optional<std::string> config_path;
  hcr::pipeline::Overrides over;
  app.add_option("--config", config_path, "Key-value config file");
  app.add_option("--seed", over.seed, "Seed for every stage");
  app.add_option("--jobs", over.jobs, "Folds trained in parallel")->check(CLI::PositiveNumber);
  app.add_option("--window", over.window, "Hours after ICU admission: 12, 24 or 48")
      ->check(CLI::IsMember({12, 24, 48}));
  app.add_option("--model", over.model, "notes-hcr, cts-rnn or mm-hcr")
      ->check(CLI::IsMember({"notes-hcr", "cts-rnn", "mm-hcr"}));
  std::optional<std::string> work_dir;
  app.add_option("--work-dir", work_dir, "Directory for data and artifacts");

  app.add_subcommand("synth", "Write synthetic admissions, icustays, notes and timeseries tables");
  app.add_subcommand("preprocess", "Clean, de-identify and tokenize notes");
  app.add_subcommand("embed", "Train skip-gram word vectors and encode notes");
  app.add_subcommand("cohort", "Select the cohort for --window and build patient-grouped folds");
  app.add_subcommand("train", "Cross-validate --model at --window");
  app.add_subcommand("evaluate", "Summarize every trained run as a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (work_dir) over.work_dir = *work_dir;

  try {
    std::optional<std::filesystem::path> path;
    if (config_path) path = *config_path;
    const auto config = hcr::pipeline::LoadRunConfig(path, over);
    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "synth") hcr::pipeline::CmdSynth(config, std::cerr);
    if (command == "preprocess") hcr::pipeline::CmdPreprocess(config, std::cerr);
    if (command == "embed") hcr::pipeline::CmdEmbed(config, std::cerr);
    if (command == "cohort") hcr::pipeline::CmdCohort(config, std::cerr);
    if (command == "train") hcr::pipeline::CmdTrain(config, std::cerr);
    if (command == "evaluate") hcr::pipeline::CmdEvaluate(config, std::cout, std::cerr);
  } catch (const hcr::Error& e) {
    fmt::print(stderr, "hcr: {} error: {}\n", hcr::ErrorKindName(e.kind()), e.what());
    return ExitCode(e.kind());
  } catch (const std::exception& e) {
    fmt::print(stderr, "hcr: {}\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
