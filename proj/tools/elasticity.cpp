#include "elasticity/cli.hpp"

int main(int argc, char** argv) { return elasticity::cli_main(argc, argv); }
