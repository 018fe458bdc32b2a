#include <iostream>

#include "dynprice/cli.h"

int main(int argc, char** argv) {
    return dynprice::cli::run({argv, argv + argc}, std::cout, std::cerr);
}
