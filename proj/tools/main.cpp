#include "cli.hpp"

int main(int argc, char** argv) { return semisamp::cli::dispatch(argc, argv); }
