#include "deepsplit/cli.hpp"

int main(int argc, char** argv) { return deepsplit::cli_main(argc, argv); }
