#include "surgtri/cli.hpp"

int main(int argc, char** argv) { return surgtri::cli::main_entry(argc, argv); }
