#include "xkgat/cli.hpp"

int main(int argc, char** argv) { return xkgat::run(argc, argv); }
