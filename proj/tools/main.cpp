#include <string>
#include <vector>

#include "egcn_cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return egcn::cli::run(args);
}
