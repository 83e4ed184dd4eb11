#include "onestory/cli.hpp"

int main(int argc, char** argv) { return onestory::cli::run_cli(argc, argv); }
