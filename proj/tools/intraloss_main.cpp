#include <string>
#include <vector>

#include "intraloss/cli_app.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return intraloss::cli::run_cli(args);
}
