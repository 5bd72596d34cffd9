#include "cli.hpp"

int main(int argc, char** argv) { return autocomp::cli::run_cli(argc, argv); }
