#include "pamacf/cli.hpp"

int main(int argc, char** argv) { return pamacf::run_cli(argc, argv); }
