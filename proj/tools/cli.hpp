#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace hdrgan::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kDiverged = 3,
};

// Entry point of the hdrgan tool. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

// "100+100" -> {100, 100}; a bare "N" means N constant epochs and no decay.
std::pair<int, int> parse_epochs(const std::string& text);
// Half-open "a..b" -> [a, b); a bare "n" is the single seed n.
std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text);

}  // namespace hdrgan::cli
