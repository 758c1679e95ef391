#include "poiseuille/experiments.hpp"

int main(int argc, char** argv) { return poiseuille::cli_main(argc, argv); }
