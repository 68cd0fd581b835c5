#pragma once

// Command-line front end: synth, train, evaluate, classify.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 data error,
// 4 internal invariant violation.

#include <iosfwd>
#include <string>
#include <vector>

namespace gzk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gzk::cli
