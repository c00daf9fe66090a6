// Times the serial battery reference against the OpenMP kernel.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <omp.h>

#include "crushpool/battery.hpp"
#include "crushpool/generators.hpp"

namespace {

template <typename Fn>
double best_of(int repeats, Fn&& fn) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace crushpool;
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 3;
    if (argc > 2 || repeats < 1) {
        std::fprintf(stderr, "usage: crushpool_bench [repeats >= 1]  (default 3; OMP_NUM_THREADS sets threads)\n");
        return 2;
    }
    const auto gen = parse_generator_name("xorshift64star", 42);
    std::printf("%-11s %12s %12s %8s  (threads=%d)\n", "battery", "sequential_s", "parallel_s", "speedup",
                omp_get_max_threads());
    for (const auto kind : {BatteryKind::SmallCrush, BatteryKind::Crush, BatteryKind::BigCrush}) {
        const double seq = best_of(repeats, [&] { (void)run_sequential(kind, gen); });
        const double par = best_of(repeats, [&] { (void)run_parallel(kind, gen); });
        const bool same = run_parallel(kind, gen) == run_sequential(kind, gen);
        std::printf("%-11s %12.4f %12.4f %8.2f  %s\n", std::string(battery_name(kind)).c_str(), seq, par, seq / par,
                    same ? "identical" : "MISMATCH");
        if (!same) return 1;
    }
    return 0;
}
