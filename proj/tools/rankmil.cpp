#include "rankmil/cli.hpp"

int main(int argc, char** argv) { return rankmil::cli::run(argc, argv); }
