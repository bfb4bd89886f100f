#include "walkback/cli.hpp"

int main(int argc, char** argv) { return walkback::run_cli(argc, argv); }
