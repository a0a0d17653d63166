#include "spot/cli.hpp"

int main(int argc, char** argv) { return spot::run_cli(argc, argv); }
