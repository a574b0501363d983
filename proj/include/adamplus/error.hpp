#pragma once

#include <stdexcept>
#include <string>

namespace adamplus {

enum class Errc {
  DimensionMismatch,
  InvalidArgument,
  DegenerateStepSize,
  InsufficientSeeds,
  PremiseUnmet,
  Parse,
  Io,
  Config,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace adamplus
