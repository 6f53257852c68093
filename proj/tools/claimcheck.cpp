// SPDX-License-Identifier: Apache-2.0
// Command-line entry point: one subcommand per pipeline stage plus `all`.
#include <CLI11.hpp>

#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "claimcheck/pipeline.hpp"

namespace hp = claimcheck::pipeline;

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string work_dir;
  bool force = false;
  bool no_think = false;
  bool no_consensus_filter = false;
  bool quiet = false;
  std::string mode;
  std::string slot;
  std::string invalid_policy;
  std::vector<std::string> datasets;
};

std::vector<std::string> collect_overrides(const Flags& f) {
  std::vector<std::string> out = f.overrides;
  if (f.seed) out.push_back("seed=" + std::to_string(*f.seed));
  if (!f.work_dir.empty()) out.push_back("work_dir=" + claimcheck::json_quote(f.work_dir));
  if (f.no_think) out.push_back("eval.mode=\"no_think\"");
  if (!f.mode.empty()) out.push_back("eval.mode=" + claimcheck::json_quote(f.mode));
  if (f.no_consensus_filter) out.push_back("consensus_filter=false");
  if (!f.slot.empty()) out.push_back("eval.slot=" + claimcheck::json_quote(f.slot));
  if (!f.invalid_policy.empty()) out.push_back("eval.invalid_policy=" + claimcheck::json_quote(f.invalid_policy));
  return out;
}

hp::PipelineConfig load_config(const Flags& f) {
  auto config = hp::PipelineConfig::load(f.config, collect_overrides(f));
  if (!f.datasets.empty()) {
    const std::set<std::string> wanted(f.datasets.begin(), f.datasets.end());
    std::vector<hp::EvalDataset> kept;
    for (auto& d : config.eval.datasets) {
      if (wanted.count(d.name)) kept.push_back(std::move(d));
    }
    if (kept.size() != wanted.size()) throw std::invalid_argument("--dataset names an unknown dataset");
    config.eval.datasets = std::move(kept);
  }
  return config;
}

void print_run(const hp::StageRun& run) {
  std::cout << run.manifest.stage << (run.executed ? " ok " : " unchanged ")
            << claimcheck::dump_compact(run.manifest.counts) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic hallucination-detection data pipeline and evaluation harness"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", flags.config, "Pipeline config file (JSON)")->required();
    sub->add_option("--set", flags.overrides, "Override a config field: dotted.key=value");
    sub->add_option("--seed", flags.seed, "Root seed");
    sub->add_option("--work-dir", flags.work_dir, "Directory for stage outputs and manifests");
    sub->add_flag("--force", flags.force, "Run even when upstream digests do not match");
    sub->add_flag("--no-consensus-filter", flags.no_consensus_filter, "Pass tuples through the judge filter");
    sub->add_flag("--no-think", flags.no_think, "Evaluate in no_think mode");
    sub->add_flag("-q,--quiet", flags.quiet, "Only print errors");
  };
  auto add_eval = [&](CLI::App* sub) {
    sub->add_option("--mode", flags.mode, "Evaluation mode")->check(CLI::IsMember({"think", "no_think"}));
    sub->add_option("--slot", flags.slot, "Endpoint slot of the evaluated model");
    sub->add_option("--invalid-policy", flags.invalid_policy, "How invalid predictions are scored")
        ->check(CLI::IsMember({"count_as_wrong", "exclude"}));
    sub->add_option("--dataset", flags.datasets, "Restrict to these datasets");
  };

  std::vector<std::pair<CLI::App*, std::optional<hp::Stage>>> commands;
  const std::map<hp::Stage, std::string> help = {
      {hp::Stage::ingest, "Load, language-gate, deduplicate and sample the corpus"},
      {hp::Stage::curate, "Safety, quality, length and near-duplicate filters"},
      {hp::Stage::reform, "Rewrite documents into sampled styles"},
      {hp::Stage::claims, "Generate grounded and hallucinated claims"},
      {hp::Stage::prefs, "Generate chosen/rejected completions and verify agreement"},
      {hp::Stage::filter, "Judge consensus filter"},
      {hp::Stage::export_, "Write the preference dataset and audit sidecar"},
      {hp::Stage::eval, "Classify benchmark records"},
      {hp::Stage::report, "Compute metrics and render the results table"},
  };
  for (hp::Stage s : hp::kAllStages) {
    auto* sub = app.add_subcommand(std::string(hp::to_string(s)), help.at(s));
    add_common(sub);
    if (s == hp::Stage::eval || s == hp::Stage::report) add_eval(sub);
    commands.emplace_back(sub, s);
  }
  auto* all = app.add_subcommand("all", "Run every stage in order");
  add_common(all);
  add_eval(all);
  commands.emplace_back(all, std::nullopt);

  CLI11_PARSE(app, argc, argv);

  hp::PipelineConfig config;
  try {
    config = load_config(flags);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  hp::RunOptions options;
  options.force = flags.force;
  options.log = flags.quiet ? nullptr : &std::cerr;

  for (const auto& [sub, stage] : commands) {
    if (!sub->parsed()) continue;
    if (!stage) {
      const auto result = hp::run_all(config, options);
      if (!flags.quiet) {
        for (const auto& r : result.runs) print_run(r);
      }
      if (!result.ok()) {
        std::cerr << "stage " << hp::to_string(*result.failed_stage) << " failed: " << result.error << "\n";
        return 1;
      }
      return 0;
    }
    try {
      const auto run = hp::run_stage(*stage, config, options);
      if (!flags.quiet) {
        print_run(run);
        if (*stage == hp::Stage::report) std::cout << claimcheck::read_text_file(config.output("report_table"));
      }
    } catch (const hp::StageRefused& e) {
      std::cerr << "refused: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "stage " << hp::to_string(*stage) << " failed: " << e.what() << "\n";
      return 1;
    }
  }
  return 0;
}
