#include "zoomstack/cli.hpp"

int main(int argc, char** argv) { return zoomstack::run_cli(argc, argv); }
