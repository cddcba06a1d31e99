#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "riskscore/clustering.hpp"
#include "riskscore/corpus.hpp"
#include "riskscore/labels.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    static std::mt19937_64 gen(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("riskscore_" + name + "_" + std::to_string(gen() % 1000000000));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& f) const { return path_ / f; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline riskscore::Document doc(std::string id, std::string text, std::string domain = "d.example",
                               std::vector<std::string> phones = {},
                               std::vector<std::string> locations = {}) {
  riskscore::Document d;
  d.id = std::move(id);
  d.text = std::move(text);
  d.source_domain = std::move(domain);
  d.phones = std::move(phones);
  d.locations = std::move(locations);
  return d;
}

inline riskscore::LabeledCluster labeled(std::string id, std::vector<std::string> members,
                                         riskscore::Label label,
                                         riskscore::LabelSource source = riskscore::LabelSource::expert) {
  return {{std::move(id), std::move(members)}, label, source};
}

}  // namespace testing
