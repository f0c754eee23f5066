#include "cli.hpp"

int main(int argc, char** argv) { return carrysim::cli::dispatch(argc, argv); }
