#pragma once

#include <string>
#include <utility>

namespace rasr::detail {

// Splits "http://host:port/prefix" into the host part and the path prefix.
inline std::pair<std::string, std::string> split_endpoint(
    const std::string& endpoint) {
  const std::size_t scheme = endpoint.find("://");
  const std::size_t path_start =
      endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) return {endpoint, ""};
  std::string prefix = endpoint.substr(path_start);
  if (prefix == "/") prefix.clear();
  return {endpoint.substr(0, path_start), prefix};
}

}  // namespace rasr::detail
