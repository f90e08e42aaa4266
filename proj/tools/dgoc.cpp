#include "dgoc/cli.hpp"

int main(int argc, char** argv) { return dgoc::cli_main(argc, argv); }
