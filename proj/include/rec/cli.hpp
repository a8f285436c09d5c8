#pragma once

#include <string>
#include <vector>

#include "rec/config.hpp"

namespace rec {

// parsed command line: command, then --config/--seed/--out plus free-form
// --<dotted.key> <value> overrides applied on top of the config file
struct CliArgs {
    std::string command;
    Config config;
};

CliArgs parse_cli(const std::vector<std::string>& args);

extern const std::vector<std::string> kCommands;

// runs one subcommand; returns the process exit status
int dispatch(const std::string& command, const Config& cfg);

std::string usage();

}  // namespace rec
