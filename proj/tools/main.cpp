#include <string>
#include <vector>

#include "impact/cli.hpp"

int main(int argc, char** argv) {
    return impact::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
