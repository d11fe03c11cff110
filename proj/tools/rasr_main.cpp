#include <vector>

#include "rasr/cli_app.hpp"

int main(int argc, char** argv) {
  return rasr::run_cli(std::vector<std::string>(argv, argv + argc));
}
