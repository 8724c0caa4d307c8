#include "atomlens/cli.hpp"

int main(int argc, char** argv) { return atomlens::cli::run(argc, argv); }
