#include "sincnet/cli/commands.hpp"

int main(int argc, char** argv) { return sincnet::cli::run_cli(argc, argv); }
