#include <string>
#include <vector>

#include "condsamp/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return condsamp::cli::dispatch(args);
}
