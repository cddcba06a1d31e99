#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace riskscore {

// Flat `key = value` text. Keys may be dotted ("model.lambda"); `#` starts a
// comment line; later assignments win.
using KeyValues = std::map<std::string, std::string>;

// Throws ConfigError naming the line for anything that is not an assignment.
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::filesystem::path& path);

// "key=value" from a command-line override.
std::pair<std::string, std::string> parse_assignment(std::string_view text);

}  // namespace riskscore
