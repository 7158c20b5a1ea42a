#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace resbemf::cli {

enum ExitCode : int { ok = 0, input_error = 2, runtime_error = 3 };

/// Runs one command line (without the program name), e.g.
/// {"fit", "--input", "train.tsv", "-k", "4"}. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace resbemf::cli
