#include "frmofdm/experiments.hpp"

#include <cstdlib>

int main(int argc, char** argv) {
    // trial-level parallelism lives in the OpenMP loops; nested BLAS threads
    // only contend with them
    setenv("OPENBLAS_NUM_THREADS", "1", 0);
    return frmofdm::cli_main(argc, argv);
}
