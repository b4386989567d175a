#include "dampopt/cli.hpp"

int main(int argc, char** argv) { return dampopt::run_cli(argc, argv); }
