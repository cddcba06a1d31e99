#include "riskscore/config.hpp"

#include <fstream>
#include <sstream>

#include "riskscore/error.hpp"
#include "riskscore/text.hpp"

namespace riskscore {

std::pair<std::string, std::string> parse_assignment(std::string_view line) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw ConfigError(std::string(line), "expected key = value");
  std::string key = text::trim(line.substr(0, eq));
  std::string value = text::trim(line.substr(eq + 1));
  if (key.empty()) throw ConfigError(std::string(line), "empty key");
  return {std::move(key), std::move(value)};
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = text::trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    try {
      auto [k, v] = parse_assignment(line);
      out[k] = v;
    } catch (const ConfigError&) {
      throw ConfigError("line " + std::to_string(line_no), "expected key = value, got '" + line + "'");
    }
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str());
}

}  // namespace riskscore
