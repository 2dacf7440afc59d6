#include "clineage/cli.hpp"

int main(int argc, char** argv) { return clineage::cli::run(argc, argv); }
