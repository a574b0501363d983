#include "adamplus/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "adamplus/error.hpp"

namespace adamplus {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(Errc::Io, "read failed: " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::Io, "cannot open file for writing: " + path);
  out << content;
  out.flush();
  if (!out) fail(Errc::Io, "write failed: " + path);
}

}  // namespace adamplus
