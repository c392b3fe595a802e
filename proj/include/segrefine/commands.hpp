#pragma once

#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <utility>

#include "segrefine/config.hpp"

namespace segrefine {

/// Process exit statuses shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // usage errors, training aborts
  kExitIo = 2,       // missing or unreadable files
  kExitShape = 3,    // extent or channel mismatches
  kExitUnmatched = 4,
  kExitUnknownLabel = 5,
};

/// One machine-parseable log line: `event=<event> k1=v1 k2=v2 ...`.
void log_event(std::ostream& os, const std::string& event,
               std::initializer_list<std::pair<std::string, std::string>> fields = {});

struct RefineArgs {
  std::filesystem::path image;
  std::filesystem::path mask;
  std::filesystem::path out;
  std::filesystem::path model;
  std::filesystem::path confidence_out;  // optional raw probabilities
  std::filesystem::path overlay_out;     // optional visualisation
};

struct EvalArgs {
  std::filesystem::path pred_dir;
  std::filesystem::path gt_dir;
  std::filesystem::path out_dir;  // report.txt and report.kv; empty = stdout only
};

struct ParseArgs {
  std::filesystem::path image;
  std::filesystem::path labels;
  std::filesystem::path manifest;
  std::filesystem::path out;
  std::filesystem::path model;
};

struct PerturbArgs {
  std::filesystem::path gt_dir;
  std::filesystem::path out_dir;
};

int cmd_refine(const RefineArgs& args, const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_eval(const EvalArgs& args, std::ostream& log);
int cmd_parse(const ParseArgs& args, const RunConfig& config, std::ostream& log);
/// Writes <stem>.png per input mask plus perturb_manifest.txt (seed, params,
/// per-file IoU, mean IoU). File k uses rng stream split_rng(seed, k) in
/// sorted stem order.
int cmd_perturb(const PerturbArgs& args, const RunConfig& config, std::ostream& log);

}  // namespace segrefine
