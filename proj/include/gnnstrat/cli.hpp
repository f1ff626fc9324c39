#pragma once

#include <filesystem>
#include <ostream>
#include <string_view>

namespace gnnstrat {

/// Entry point of the command-line tool. Returns 0 on success, 2 on bad
/// usage and 1 when the requested work fails.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Writes `content` to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace gnnstrat
