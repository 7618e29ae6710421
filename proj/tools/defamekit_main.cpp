#include "defamekit/cli.hpp"

int main(int argc, char** argv) { return defamekit::cli_main(argc, argv); }
