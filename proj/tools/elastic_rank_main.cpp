#include "elastic/report.hpp"

int main(int argc, char** argv) { return elastic::cli_run(argc, argv); }
