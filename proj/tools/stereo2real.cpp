#include "s2r/commands.hpp"

int main(int argc, char** argv) { return s2r::run_cli(argc, argv); }
