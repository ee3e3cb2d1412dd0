#include "cli.hpp"

int main(int argc, char** argv) { return hcstokes::cli::run(argc, argv); }
