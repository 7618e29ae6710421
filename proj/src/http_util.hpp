#pragma once

// Shared helpers for the HTTP clients. Internal to the library.

#include <string>
#include <string_view>

namespace defamekit::detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

inline SplitUrl split_url(std::string_view url) {
  SplitUrl out;
  const auto scheme = url.find("://");
  const auto host_start = scheme == std::string_view::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  if (slash == std::string_view::npos) {
    out.origin = std::string(url);
  } else {
    out.origin = std::string(url.substr(0, slash));
    out.prefix = std::string(url.substr(slash));
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

}  // namespace defamekit::detail
