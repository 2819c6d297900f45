#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace speds::cli {

enum ExitCode : int {
    kSuccess = 0,
    kInternalError = 1,
    kUsageError = 2,
    kNumericalFailure = 3,
};

struct Preset {
    std::string_view name;
    std::string_view json;
};

// Presets compiled in from tools/presets/*.json, sorted by name.
const std::vector<Preset>& presets();

// Runs the tool on argv-style arguments (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace speds::cli
