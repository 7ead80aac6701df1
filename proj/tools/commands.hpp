#pragma once

#include <functional>
#include <vector>

#include <CLI11.hpp>

namespace immersia::cli {

struct Command {
  CLI::App* app = nullptr;
  std::function<int()> run;  // returns the exit status
};

// Registers every subcommand on app.
std::vector<Command> register_commands(CLI::App& app);

}  // namespace immersia::cli
