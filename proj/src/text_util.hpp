#pragma once

#include <sstream>
#include <string>

namespace canids {

// Multi-line provenance text as '# ' comment lines.
inline std::string comment_block(const std::string &text) {
  std::string out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    out += "# ";
    out += line;
    out += '\n';
  }
  return out;
}

} // namespace canids
