#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace ccsim {

struct SampleStats {
    std::uint64_t count = 0;
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation (n-1)
    double min = 0.0;
    double max = 0.0;
    double p99 = 0.0; // nearest-rank
};

inline SampleStats compute_stats(std::vector<double> samples) {
    SampleStats s;
    s.count = samples.size();
    if (samples.empty()) return s;
    double sum = 0.0;
    for (double v : samples) sum += v;
    s.mean = sum / static_cast<double>(samples.size());
    double sq = 0.0;
    for (double v : samples) sq += (v - s.mean) * (v - s.mean);
    s.stddev = samples.size() > 1 ? std::sqrt(sq / static_cast<double>(samples.size() - 1)) : 0.0;
    std::sort(samples.begin(), samples.end());
    s.min = samples.front();
    s.max = samples.back();
    const size_t rank = static_cast<size_t>(std::ceil(0.99 * static_cast<double>(samples.size())));
    s.p99 = samples[rank > 0 ? rank - 1 : 0];
    return s;
}

} // namespace ccsim
