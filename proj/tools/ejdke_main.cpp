#include "ejdke/cli.hpp"

int main(int argc, char** argv) { return ejdke::run_cli(argc, argv); }
