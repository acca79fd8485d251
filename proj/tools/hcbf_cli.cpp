#include "hcbf/cli.hpp"

int main(int argc, char** argv) { return hcbf::run_cli(argc, argv); }
