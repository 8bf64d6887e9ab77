#include "cmoe/cli.hpp"

int main(int argc, char** argv) { return cmoe::run_cli(argc, argv); }
