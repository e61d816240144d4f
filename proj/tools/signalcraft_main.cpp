#include <vector>

#include "signalcraft/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return signalcraft::cli::run(std::move(args));
}
