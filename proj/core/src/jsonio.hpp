#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "json.hpp"

namespace privlex::jsonio {

using json = nlohmann::json;

/// Canonical serialization: sorted keys (nlohmann::json is map-backed), two-space indent,
/// shortest round-trip decimal for doubles, trailing newline. Byte-stable across runs.
std::string canonical(const json& doc);

json read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Calls `fn(record, line_number)` for every non-blank line of a JSON Lines file.
/// Parse errors are reported as ValidationError naming the line.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(const json&, std::size_t)>& fn);

}  // namespace privlex::jsonio
