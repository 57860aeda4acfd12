/**
 * Mismatch replay: reconstructs the ground-truth window of a persisted
 * record tick by tick alongside the estimate stream, emits a textual/CSV
 * timeline, and re-runs the evaluation at the mismatch instant to confirm
 * the record reproduces.
 */
#pragma once

#include <algorithm>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "ccsim/detector/buffers.hpp"
#include "ccsim/detector/evaluate.hpp"
#include "ccsim/detector/storage.hpp"

namespace ccsim {

struct ReplayResult {
    std::string timeline;       // per-tick rows
    bool reproduced = false;    // re-evaluation yields the recorded criterion
    std::string reproduced_detail;
    bool truncated = false;
    size_t ticks = 0;
};

inline GroundTruthBuffers buffers_from_record(const MismatchRecord& rec,
                                              std::uint64_t window_us = 10'000'000) {
    GroundTruthBuffers buffers(window_us);
    for (const auto& m : rec.manifest) {
        EntityKind kind;
        kind.cls = m.cls;
        kind.extent_x = m.extent_x;
        kind.extent_y = m.extent_y;
        kind.real_height = m.real_height;
        buffers.set_kind(m.entity_id, kind);
    }
    for (const auto& [id, states] : rec.gt_window) buffers.ingest(states);
    return buffers;
}

inline ReplayResult replay_record(const MismatchRecord& rec, const MatchCriteria& criteria) {
    ReplayResult out;
    auto buffers = buffers_from_record(rec);

    // tick grid: union of ground-truth sample times in the window
    std::set<std::uint64_t> tick_times;
    for (const auto& [id, states] : rec.gt_window)
        for (const auto& s : states) tick_times.insert(s.sim_time_us);

    std::ostringstream o;
    o << std::fixed << std::setprecision(3);
    o << "# replay record=" << rec.record_id << " criterion=" << to_string(rec.criterion)
      << " scenario=" << rec.scenario_name << " seed=" << rec.seed << "\n";
    o << "# pipeline_age_ms="
      << static_cast<double>(rec.timing.pipeline_age_us()) / 1000.0 << " detail=\"" << rec.detail
      << "\"\n";
    o << "sim_t_s,hazard,derived_state,vehicle_x,vehicle_y,speed,nearest_report_age_ms";
    for (const auto& m : rec.manifest)
        if (m.entity_id != rec.entity_id)
            o << ",e" << m.entity_id << "_x,e" << m.entity_id << "_y";
    o << "\n";

    for (const auto t : tick_times) {
        const auto world = buffers.align(t);
        if (!world) continue;
        ++out.ticks;

        std::string hazard = "-";
        const EntitySnapshot* vehicle = nullptr;
        for (const auto& e : world->entities)
            if (e.state.entity_id == rec.entity_id) vehicle = &e;
        if (vehicle) hazard = to_string(classify_hazard(world->entities, rec.entity_id, criteria.hazard));

        // nearest report at or before t
        const EstimateReportMsg* nearest = nullptr;
        for (const auto& rep : rec.estimate_window)
            if (rep.sim_time_us <= t && (!nearest || rep.sim_time_us > nearest->sim_time_us))
                nearest = &rep;

        o << static_cast<double>(t) * 1e-6 << ',' << hazard << ','
          << (nearest ? to_string(nearest->derived_state) : "-") << ','
          << (vehicle ? vehicle->state.position.x : 0.0f) << ','
          << (vehicle ? vehicle->state.position.y : 0.0f) << ','
          << (vehicle ? planar_norm(vehicle->state.velocity) : 0.0f) << ','
          << (nearest && nearest->t_estimate_us > nearest->t_render_us
                  ? static_cast<double>(nearest->t_estimate_us - nearest->t_render_us) / 1000.0
                  : 0.0);
        for (const auto& m : rec.manifest) {
            if (m.entity_id == rec.entity_id) continue;
            const EntitySnapshot* e = nullptr;
            for (const auto& s : world->entities)
                if (s.state.entity_id == m.entity_id) e = &s;
            o << ',' << (e ? e->state.position.x : 0.0f) << ',' << (e ? e->state.position.y : 0.0f);
        }
        o << "\n";
    }

    // re-evaluate the trigger (the newest report in the window)
    if (!rec.estimate_window.empty()) {
        const auto& trigger = rec.estimate_window.back();
        const auto world = buffers.align(trigger.sim_time_us);
        const auto findings = evaluate(trigger, world, criteria);
        for (const auto& f : findings) {
            if (f.criterion == rec.criterion) {
                out.reproduced = true;
                out.reproduced_detail = f.detail;
            }
        }
        o << "# re-evaluation: " << (out.reproduced ? "reproduced" : "NOT reproduced") << " ("
          << findings.size() << " findings)\n";
    }
    out.timeline = o.str();
    return out;
}

} // namespace ccsim
