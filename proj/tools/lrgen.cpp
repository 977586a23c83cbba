#include <lrgen/cli.hpp>

int main(int argc, char** argv) { return lrgen::cli_run(argc, argv); }
