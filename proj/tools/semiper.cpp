#include "semiper/cli.hpp"

int main(int argc, char** argv) { return semiper::cli::main_entry(argc, argv); }
