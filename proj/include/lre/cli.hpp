#pragma once

// The `lre` command-line driver: count, train, factorize, eval.
//
// Settings resolve as flags > environment (LRE_<KEY>) > --config file >
// defaults. Every command writes its resolved settings next to its outputs
// as <out>.config, which can be passed back through --config.

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

namespace lre::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Runs one command line. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const EnvLookup& env = process_env);

/// Flat key=value text; '#' starts a comment line.
std::map<std::string, std::string> read_config_file(const std::string& path);

}  // namespace lre::cli
