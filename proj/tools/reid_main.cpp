#include <string>
#include <vector>

#include "reid/pipeline.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return reid::cli_main(args);
}
