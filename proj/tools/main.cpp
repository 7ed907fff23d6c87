#include "mpse/cli.hpp"

int main(int argc, char** argv) { return mpse::run_cli(argc, argv); }
