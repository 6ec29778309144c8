#include "cmlens/cli.hpp"

int main(int argc, char** argv) { return cmlens::cli_main(argc, argv); }
