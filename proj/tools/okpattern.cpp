#include <okpattern/cli.hpp>

int main(int argc, char** argv) { return okpattern::run(argc, argv); }
