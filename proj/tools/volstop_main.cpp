#include "volstop/cli.hpp"

int main(int argc, char** argv) { return volstop::run_cli(argc, argv); }
