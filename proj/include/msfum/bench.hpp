#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace msfum {

struct BenchRow {
    int64_t length = 0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double ratio_vs_prev = 0.0;  // median(L) / median(prev L), 0 for the first row
};

// Times the chunked scan kernel over seeded inputs, one row per length.
std::vector<BenchRow> bench_scan(const std::vector<int64_t>& lengths, int64_t d_inner,
                                 int64_t n_state, int64_t repeats, uint64_t seed,
                                 int64_t chunk = 64);

std::string bench_table(const std::vector<BenchRow>& rows);

}  // namespace msfum
