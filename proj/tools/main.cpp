#include "dpwate/cli.hpp"

int main(int argc, char** argv) { return dpwate::cli::run(argc, argv); }
