#include <iostream>

#include "detmac/cli.h"

int main(int argc, char** argv)
{
    return detmac::run_cli(argc, argv, std::cout, std::cerr);
}
