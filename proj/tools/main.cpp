#include "tbp/cli.hpp"

int main(int argc, char** argv) { return tbp::cli::run(argc, argv); }
