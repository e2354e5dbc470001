#include "qhplasma/run.hpp"

int main(int argc, char** argv) { return qhp::cli::qhp_main(argc, argv); }
