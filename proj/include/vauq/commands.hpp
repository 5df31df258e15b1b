#pragma once

#include <iosfwd>

#include "vauq/config.hpp"
#include "vauq/errors.hpp"

namespace vauq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitData = 4;

int exit_code_for(ErrorKind kind);

/// Scores every record and writes scores.jsonl, summary.csv, masks.jsonl,
/// errors.jsonl and run_config.json. Returns the process exit code; fatal
/// problems are thrown as vauq::Error.
int cmd_score(RunConfig config, std::ostream& log);

/// AUROC summary per score, optionally sweep surface, transfer gaps and
/// timing. Refuses datasets without labels.
int cmd_eval(RunConfig config, std::ostream& log);

}  // namespace vauq
