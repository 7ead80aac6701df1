#include "immersia/parallel.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace immersia {

int default_thread_count() {
  if (const char* env = std::getenv("IMMERSIA_THREADS")) {
    try {
      int t = std::stoi(env);
      if (t > 0) return t;
    } catch (...) {
    }
  }
  return omp_get_max_threads();
}

void set_thread_count(int threads) { omp_set_num_threads(threads > 0 ? threads : default_thread_count()); }

int thread_count() { return omp_get_max_threads(); }

}  // namespace immersia
