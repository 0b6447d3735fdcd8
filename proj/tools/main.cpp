#include "elwqr/cli.hpp"

int main(int argc, char** argv) { return elwqr::run_cli(argc, argv); }
