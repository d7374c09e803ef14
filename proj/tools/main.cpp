#include "cli.hpp"

int main(int argc, char** argv) { return hdrgan::cli::run(argc, argv); }
