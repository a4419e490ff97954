#include "topgan/cli.hpp"

int main(int argc, char** argv) { return topgan::cli::main(argc, argv); }
