#include <iostream>
#include <string>
#include <vector>

#include "barecam/pipeline.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return barecam::pipe::cli(args, std::cout, std::cerr);
}
