#include "cemnet/cli.hpp"

int main(int argc, char** argv) { return cemnet::cli::run(argc, argv); }
