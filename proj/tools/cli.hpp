#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace raterfuse::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kIoFailure = 1;
inline constexpr int kValidationFailure = 2;

// Entry point behind the `raterfuse` binary; args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace raterfuse::cli
