#include "loadcycle/cli/cli.hpp"

int main(int argc, char** argv) { return loadcycle::cli::run(argc, argv); }
