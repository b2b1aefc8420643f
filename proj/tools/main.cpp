#include "cli.hpp"

int main(int argc, char **argv) {
    return lmm::cli::main(argc, argv);
}
