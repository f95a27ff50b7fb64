#include "mwreg/parallel.hpp"

#include <atomic>

namespace mwreg {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n)
{
    if (n <= 0)
        n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    g_threads.store(n);
}

int thread_count() { return g_threads.load(); }

} // namespace mwreg
