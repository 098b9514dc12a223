#include "vaebench/cli.hpp"

int main(int argc, char** argv) { return vaebench::run_cli(argc, argv); }
