/**
 * Ground-truth state history. One time-ordered ring per entity holding
 * window_s seconds; align() reconstructs the world at an estimate's frame
 * time by linear interpolation between the bracketing samples.
 */
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "ccsim/world/types.hpp"

namespace ccsim {

class StateBuffer {
public:
    explicit StateBuffer(std::uint64_t window_us = 10'000'000) : window_us_(window_us) {}

    // Rejects entries that would break per-entity time ordering.
    bool push(const EntityState& s) {
        if (!entries_.empty() && s.sim_time_us < entries_.back().sim_time_us) return false;
        entries_.push_back(s);
        // keep everything within window_us of the newest entry, inclusive
        while (!entries_.empty() &&
               entries_.front().sim_time_us + window_us_ < entries_.back().sim_time_us)
            entries_.pop_front();
        return true;
    }

    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::deque<EntityState>& entries() const { return entries_; }

    std::uint64_t span_us() const {
        return entries_.empty() ? 0 : entries_.back().sim_time_us - entries_.front().sim_time_us;
    }

    struct Aligned {
        EntityState state;
        bool extrapolated = false; // query fell outside the buffered range
    };

    // State at sim_time_us: exact sample, linear position interpolation
    // between brackets (velocity/direction from the earlier sample), or
    // the nearest sample flagged extrapolated.
    std::optional<Aligned> at(std::uint64_t sim_time_us) const {
        if (entries_.empty()) return std::nullopt;
        Aligned out;
        if (sim_time_us <= entries_.front().sim_time_us) {
            out.state = entries_.front();
            out.extrapolated = sim_time_us < entries_.front().sim_time_us;
            return out;
        }
        if (sim_time_us >= entries_.back().sim_time_us) {
            out.state = entries_.back();
            out.extrapolated = sim_time_us > entries_.back().sim_time_us;
            return out;
        }
        // first entry with time >= query
        size_t lo = 0, hi = entries_.size() - 1;
        while (lo < hi) {
            const size_t mid = (lo + hi) / 2;
            if (entries_[mid].sim_time_us < sim_time_us)
                lo = mid + 1;
            else
                hi = mid;
        }
        const EntityState& b = entries_[lo];
        if (b.sim_time_us == sim_time_us) {
            out.state = b;
            return out;
        }
        const EntityState& a = entries_[lo - 1];
        const double t = static_cast<double>(sim_time_us - a.sim_time_us) /
                         static_cast<double>(b.sim_time_us - a.sim_time_us);
        out.state = a;
        out.state.sim_time_us = sim_time_us;
        out.state.position = a.position + (b.position - a.position) * static_cast<float>(t);
        return out;
    }

private:
    std::uint64_t window_us_;
    std::deque<EntityState> entries_;
};

struct AlignedWorld {
    std::vector<EntitySnapshot> entities;
    bool extrapolated = false;
    std::uint64_t sim_time_us = 0;
};

// Buffers for every entity plus the kind manifest needed to reconstruct
// EntitySnapshots for hazard classification and class matching.
class GroundTruthBuffers {
public:
    explicit GroundTruthBuffers(std::uint64_t window_us = 10'000'000) : window_us_(window_us) {}

    void set_kind(std::uint32_t entity_id, const EntityKind& kind) { kinds_[entity_id] = kind; }

    const std::map<std::uint32_t, EntityKind>& kinds() const { return kinds_; }

    // Returns the number of rejected (out-of-order) records.
    int ingest(const std::vector<EntityState>& batch) {
        int rejected = 0;
        for (const auto& s : batch) {
            auto [it, inserted] = buffers_.try_emplace(s.entity_id, StateBuffer(window_us_));
            if (!it->second.push(s)) ++rejected;
        }
        return rejected;
    }

    bool empty() const { return buffers_.empty(); }
    const std::map<std::uint32_t, StateBuffer>& buffers() const { return buffers_; }

    std::optional<AlignedWorld> align(std::uint64_t sim_time_us) const {
        if (buffers_.empty()) return std::nullopt;
        AlignedWorld world;
        world.sim_time_us = sim_time_us;
        for (const auto& [id, buf] : buffers_) {
            auto aligned = buf.at(sim_time_us);
            if (!aligned) continue;
            EntitySnapshot snap;
            auto kind_it = kinds_.find(id);
            if (kind_it != kinds_.end()) snap.kind = kind_it->second;
            snap.state = aligned->state;
            world.entities.push_back(snap);
            world.extrapolated = world.extrapolated || aligned->extrapolated;
        }
        if (world.entities.empty()) return std::nullopt;
        return world;
    }

private:
    std::uint64_t window_us_;
    std::map<std::uint32_t, StateBuffer> buffers_;
    std::map<std::uint32_t, EntityKind> kinds_;
};

} // namespace ccsim
