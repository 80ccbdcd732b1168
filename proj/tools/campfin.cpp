#include "campfin/cli.hpp"

int main(int argc, char** argv) { return campfin::cli::run(argc, argv); }
