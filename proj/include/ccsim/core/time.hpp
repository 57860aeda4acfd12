// Monotonic clock helpers. All timestamps in the system are microsecond
// counts on CLOCK_MONOTONIC, which is shared by every process on one host.
#pragma once

#include <cstdint>
#include <ctime>
#include <thread>

namespace ccsim {

inline std::uint64_t mono_now_us() {
    timespec ts{};
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return static_cast<std::uint64_t>(ts.tv_sec) * 1000000ull +
           static_cast<std::uint64_t>(ts.tv_nsec) / 1000ull;
}

// Absolute-deadline sleep. Returns immediately if the deadline has passed.
// Using TIMER_ABSTIME keeps fixed-rate loops from accumulating drift.
inline void sleep_until_us(std::uint64_t deadline_us) {
    timespec ts{};
    ts.tv_sec = static_cast<time_t>(deadline_us / 1000000ull);
    ts.tv_nsec = static_cast<long>((deadline_us % 1000000ull) * 1000ull);
    while (clock_nanosleep(CLOCK_MONOTONIC, TIMER_ABSTIME, &ts, nullptr) != 0) {
        // retry on EINTR
    }
}

inline void sleep_for_us(std::uint64_t us) { sleep_until_us(mono_now_us() + us); }

// Spins on the monotonic clock; used by the optional cpu-burn latency mode.
inline void burn_until_us(std::uint64_t deadline_us) {
    while (mono_now_us() < deadline_us) {
    }
}

} // namespace ccsim
