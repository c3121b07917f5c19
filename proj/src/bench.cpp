#include "msfum/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "msfum/ssm.hpp"

namespace msfum {

std::vector<BenchRow> bench_scan(const std::vector<int64_t>& lengths, int64_t d_inner,
                                 int64_t n_state, int64_t repeats, uint64_t seed, int64_t chunk) {
    using clock = std::chrono::steady_clock;
    Rng rng(seed);
    SsmParams<float> params =
        SsmParams<float>::seeded(d_inner, n_state, std::max<int64_t>(1, d_inner / 8), rng);

    std::vector<BenchRow> rows;
    double prev_median = 0.0;
    volatile float guard = 0.0f;  // keep the scan result live
    for (int64_t l : lengths) {
        std::vector<float> x(static_cast<size_t>(l * d_inner));
        for (auto& v : x) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        // warmup
        guard = guard + scan_chunked(x, l, params, chunk)[0];
        std::vector<double> times;
        times.reserve(static_cast<size_t>(repeats));
        for (int64_t r = 0; r < repeats; ++r) {
            const auto t0 = clock::now();
            auto y = scan_chunked(x, l, params, chunk);
            const auto t1 = clock::now();
            guard = guard + y[static_cast<size_t>(y.size() / 2)];
            times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        std::sort(times.begin(), times.end());
        BenchRow row;
        row.length = l;
        double acc = 0.0;
        for (double t : times) acc += t;
        row.mean_ms = acc / static_cast<double>(times.size());
        row.median_ms = times[times.size() / 2];
        row.ratio_vs_prev = prev_median > 0.0 ? row.median_ms / prev_median : 0.0;
        prev_median = row.median_ms;
        rows.push_back(row);
    }
    (void)guard;
    return rows;
}

std::string bench_table(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << "L\tmean_ms\tmedian_ms\tratio\n";
    char buf[96];
    for (const auto& r : rows) {
        if (r.ratio_vs_prev > 0.0) {
            std::snprintf(buf, sizeof(buf), "%lld\t%.3f\t%.3f\t%.3f\n",
                          static_cast<long long>(r.length), r.mean_ms, r.median_ms,
                          r.ratio_vs_prev);
        } else {
            std::snprintf(buf, sizeof(buf), "%lld\t%.3f\t%.3f\t-\n",
                          static_cast<long long>(r.length), r.mean_ms, r.median_ms);
        }
        os << buf;
    }
    return os.str();
}

}  // namespace msfum
