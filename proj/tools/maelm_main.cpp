#include <string>
#include <vector>

#include "maelm/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return maelm::dispatch(args);
}
