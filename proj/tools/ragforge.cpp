#include "ragforge/cli.hpp"

int main(int argc, char** argv) { return ragforge::cli::run(argc, argv); }
