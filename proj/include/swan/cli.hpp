#pragma once

namespace swan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBadConfig = 3;
inline constexpr int kExitMissingInput = 4;

int run_cli(int argc, const char* const* argv);

}  // namespace swan
