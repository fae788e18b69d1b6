#include "derids/cli.hpp"

int main(int argc, char** argv) { return derids::cli::run(argc, argv); }
