#include "balance/harness.hpp"

int main(int argc, char** argv) { return balance::cli_run(argc, argv); }
