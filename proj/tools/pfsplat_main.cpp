#include "pfsplat/cli.hpp"

int main(int argc, char** argv) { return pfsplat::cli::run(argc, argv); }
