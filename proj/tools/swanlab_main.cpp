#include "swan/cli.hpp"

int main(int argc, char** argv) { return swan::run_cli(argc, argv); }
