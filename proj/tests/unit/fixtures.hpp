#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "defamekit/config.hpp"
#include "defamekit/domain.hpp"

namespace fixtures {

inline std::string data(const std::string& rel) { return std::string(DEFAMEKIT_DATA_DIR) + "/" + rel; }

inline defamekit::CampaignBrief appendix_brief() {
  return defamekit::parse_brief(defamekit::read_text_file(data("appendix_a/brief.json")));
}

inline std::string poster(const std::string& name) { return defamekit::read_text_file(data("appendix_a/" + name + ".txt")); }

// Fresh scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / ("defamekit_" + name + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& rel) const { return (path / rel).string(); }
};

}  // namespace fixtures
