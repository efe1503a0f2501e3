#include "freqgan/cli.hpp"

int main(int argc, char** argv) { return freqgan::cli::run(argc, argv); }
