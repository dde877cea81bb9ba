#include "graphmfe/cli.hpp"

int main(int argc, char** argv) { return graphmfe::cli::run(argc, argv); }
