#include "cli.hpp"

int main(int argc, char** argv) { return rowtrack::cli::run_cli(argc, argv); }
