#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace topgan::cli {

inline const std::vector<std::string> kCommands{"synth", "train-gan", "train-clf", "eval", "sweep", "sample"};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Every key is also a --flag (underscores become dashes).
nlohmann::json defaults(const std::string& command);

/// defaults, overlaid by `file` (unknown keys rejected), overlaid by `flags`.
nlohmann::json resolve(const std::string& command, const nlohmann::json& file, const nlohmann::json& flags);

/// Runs a resolved config. Writes <command>_config.json into config["out"]
/// first, then the command's artifacts. Returns a short summary.
nlohmann::json run(const std::string& command, const nlohmann::json& config);

/// argv entry point; maps ValidationError/parse errors to 2, others to 3.
int main(int argc, char** argv);

}  // namespace topgan::cli
