#include "vitask/cli/cli.hpp"

int main(int argc, char** argv) { return vitask::cli::run(argc, argv); }
