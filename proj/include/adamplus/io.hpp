#pragma once

#include <string>

namespace adamplus {

// Shortest-round-trip decimal with 17 significant digits, locale-independent.
// All numeric file output goes through this so repeated runs are
// byte-identical.
std::string format_double(double v);

std::string read_text_file(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace adamplus
