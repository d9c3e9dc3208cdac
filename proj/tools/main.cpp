#include "cli.hpp"

int main(int argc, char** argv) { return anymdp::cli::cli_main(argc, argv); }
