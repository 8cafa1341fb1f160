#include "depthpatch/cli.hpp"

int main(int argc, char** argv) { return depthpatch::dispatch(argc, argv); }
