#include "agedg/cli.hpp"

int main(int argc, char** argv) { return agedg::cli::run_cli(argc, argv); }
