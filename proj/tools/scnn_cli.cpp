#include <string>
#include <vector>

#include "scnn/pipeline.hpp"

int main(int argc, char** argv) {
  return scnn::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
