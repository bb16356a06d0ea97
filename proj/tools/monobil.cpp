#include "monobil/cli.hpp"

int main(int argc, char** argv) { return monobil::cli::run(argc, argv); }
