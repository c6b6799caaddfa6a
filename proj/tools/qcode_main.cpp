#include "qcode/cli.hpp"

int main(int argc, char** argv) { return qcode::cli::run(argc, argv); }
