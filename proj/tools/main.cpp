#include "commands.hpp"

int main(int argc, char** argv) { return qnmlpt::cli::run(argc, argv); }
