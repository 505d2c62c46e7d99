#pragma once

// Command execution behind the gridflex executable.

#include <iosfwd>
#include <optional>
#include <string>

namespace gridflex {

struct RunRequest {
    std::string config;
    std::string command;  // opf | envelope | coordinate | verify
    std::optional<int> n_dirs;
    std::optional<std::string> scheme;
    std::optional<std::string> out;
    bool svg = false;
};

/// Exit status: 0 success, 1 failure (JSON summary on err), 2 verify found violations.
int run(const RunRequest& req, std::ostream& log, std::ostream& err);

} // namespace gridflex
