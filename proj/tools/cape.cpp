#include "cape/cli.hpp"

int main(int argc, char** argv) { return cape::cli::run_main(argc, argv); }
