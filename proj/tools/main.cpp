#include <vector>

#include "adamplus/harness.hpp"

int main(int argc, char** argv) {
  return adamplus::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
