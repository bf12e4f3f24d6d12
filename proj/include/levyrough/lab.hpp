#pragma once

#include "levyrough/io.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace levyrough {

// Exit codes of the command line front end.
constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitTolerance = 3;

struct CommandResult {
    Json report;  // carries the resolved "config"
    std::vector<std::pair<std::string, std::string>> csv;  // file name, contents
    std::string summary;  // one line for stdout
    int exit_code = kExitOk;
};

// Named configurations. Keys given alongside "preset" override the preset's.
std::vector<std::string> preset_names(const std::string& command);
Json preset_config(const std::string& command, const std::string& name);

LevyTriplet preset_triplet(const std::string& name);
LinearVectorFields preset_fields(const std::string& name, const Context& ctx);

// Expands "preset", reads file references ("triplet", "path", "M", "family", "segments", "phi")
// and returns a self-contained config; running on it again gives the same outputs.
Json resolve_config(const std::string& command, Json cfg);

// command: simulate, signature, pvar, connect, lk, minp, probe, walk-converge.
// Missing keys are filled with their defaults in report["config"].
CommandResult run_command(const std::string& command, Json cfg);

// Writes <out>/<command>.json and the CSV tables.
void write_outputs(const CommandResult& r, const std::string& command, const std::filesystem::path& out);

} // namespace levyrough
