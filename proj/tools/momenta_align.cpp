#include "momalign/cli.hpp"

int main(int argc, char** argv) { return momalign::cli_main(argc, argv); }
