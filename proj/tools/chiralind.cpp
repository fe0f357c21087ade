#include "chiralind/experiment.hpp"

int main(int argc, char** argv) { return chiralind::run_cli(argc, argv); }
