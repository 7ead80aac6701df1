#pragma once

namespace immersia {

enum class Execution { serial, parallel };

// IMMERSIA_THREADS when set, otherwise the OpenMP default.
int default_thread_count();
void set_thread_count(int threads);
int thread_count();

// Fixed block size for deterministic partial sums.
inline constexpr int kReduceBlock = 4096;

}  // namespace immersia
