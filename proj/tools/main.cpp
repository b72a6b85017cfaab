#include "cli.hpp"

int main(int argc, char** argv) { return topopt::cli::run(argc, argv); }
