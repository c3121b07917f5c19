#include "msfum/cli.hpp"

int main(int argc, char** argv) { return msfum::run_cli(argc, argv); }
