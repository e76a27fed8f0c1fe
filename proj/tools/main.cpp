#include "cli.hpp"

int main(int argc, char** argv) { return mtvgp::run_cli(argc, argv); }
