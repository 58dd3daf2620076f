#include "transnet/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace transnet {

int thread_count() { return omp_get_max_threads(); }

int default_thread_count() {
    if (const char* env = std::getenv("TRANSNET_THREADS")) {
        try {
            int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    return omp_get_num_procs();
}

ScopedThreadCount::ScopedThreadCount(int threads) : previous_(omp_get_max_threads()) {
    if (threads > 0) omp_set_num_threads(threads);
}

ScopedThreadCount::~ScopedThreadCount() { omp_set_num_threads(previous_); }

}  // namespace transnet
