#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace fleet::cli {

enum class ExitStatus : int { success = 0, validation_failure = 1, usage_error = 2, runtime_error = 3 };

inline int code(ExitStatus s) { return static_cast<int>(s); }

ExitStatus cmd_validate(const std::string& model_path, std::ostream& out, std::ostream& err);
ExitStatus cmd_enumerate(const std::string& model_path, std::optional<std::size_t> limit, std::ostream& out,
                         std::ostream& err);
/// Derives against the scenario's devices and defaults. Without `selection` the scenario's
/// initial selection is used; `selection` is a comma-separated feature list.
ExitStatus cmd_derive(const std::string& model_path, const std::string& scenario_path,
                      const std::optional<std::string>& selection, std::ostream& out, std::ostream& err);
ExitStatus cmd_run(const std::string& scenario_path, std::uint64_t seed, std::int64_t until,
                   const std::string& trace_path, std::ostream& out, std::ostream& err);
ExitStatus cmd_replay(const std::string& trace_path, std::ostream& out, std::ostream& err);

/// Argument parsing and dispatch; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace fleet::cli
