#include "treecoder/cli.hpp"

int main(int argc, char** argv) { return treecoder::run_cli(argc, argv); }
