#pragma once

#include <ostream>

namespace vrc {

// Environment variable that overrides the output directory.
inline constexpr const char* kOutputDirEnv = "VRCOUNT_OUTPUT_DIR";

// Subcommands: count, baseline, synth, bench, vr-render.
// Exit codes: 0 success, 1 pipeline error, 2 usage or config error.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vrc
