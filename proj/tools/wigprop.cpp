#include <wigprop/cli.hpp>

int main(int argc, char** argv) { return wigprop::run(argc, argv); }
