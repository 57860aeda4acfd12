/**
 * Mismatch evaluation: given one estimate report and the ground-truth
 * world aligned at its frame time, produce findings for the enabled
 * criteria. Pure function; the same path serves live detection and
 * replay.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ccsim/detector/buffers.hpp"
#include "ccsim/detector/criteria.hpp"
#include "ccsim/proto/messages.hpp"
#include "ccsim/world/world.hpp"

namespace ccsim {

struct Finding {
    CriterionTag criterion = CriterionTag::DerivedState;
    std::string detail;
    double magnitude = 0.0; // position error (m) or pipeline age (ms)
};

// Greedy nearest-neighbor matching result used by the position criterion.
struct PositionCheck {
    int matched = 0;
    std::vector<std::pair<size_t, double>> over_tolerance; // (estimate idx, error m)
    std::vector<std::uint32_t> missed_entity_ids;          // in-corridor, unmatched
};

inline PositionCheck check_positions(const EstimateReportMsg& report, const AlignedWorld& world,
                                     const MatchCriteria& criteria) {
    PositionCheck out;
    const EntitySnapshot* vehicle = nullptr;
    for (const auto& e : world.entities)
        if (e.state.entity_id == report.entity_id) vehicle = &e;

    // candidate pairs sorted by planar error; ties broken deterministically
    struct Pair {
        size_t est;
        size_t gt;
        double err;
    };
    std::vector<Pair> pairs;
    for (size_t i = 0; i < report.estimates.size(); ++i) {
        for (size_t j = 0; j < world.entities.size(); ++j) {
            const auto& gt = world.entities[j];
            if (gt.state.entity_id == report.entity_id) continue; // own vehicle
            if (criteria.class_must_match && gt.kind.cls != report.estimates[i].cls) continue;
            const double err = planar_dist(report.estimates[i].world_pos, gt.state.position);
            pairs.push_back({i, j, err});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.err != b.err) return a.err < b.err;
        if (a.est != b.est) return a.est < b.est;
        return a.gt < b.gt;
    });

    std::vector<bool> est_used(report.estimates.size(), false);
    std::vector<bool> gt_used(world.entities.size(), false);
    for (const auto& p : pairs) {
        if (est_used[p.est] || gt_used[p.gt]) continue;
        est_used[p.est] = true;
        gt_used[p.gt] = true;
        ++out.matched;
        if (p.err > criteria.position_tolerance_m) out.over_tolerance.push_back({p.est, p.err});
    }

    // unmatched ground-truth entities inside the client's corridor
    if (vehicle) {
        const Vec3 heading = vehicle->state.direction;
        const Vec3 right = right_of(heading);
        for (size_t j = 0; j < world.entities.size(); ++j) {
            if (gt_used[j]) continue;
            const auto& gt = world.entities[j];
            if (gt.state.entity_id == report.entity_id) continue;
            const Vec3 rel = gt.state.position - vehicle->state.position;
            const float fwd = dot(rel, heading);
            const float lat = dot(rel, right);
            if (fwd > 0.0f && fwd <= criteria.missed_range_m &&
                std::fabs(lat) < criteria.corridor_halfwidth_m)
                out.missed_entity_ids.push_back(gt.state.entity_id);
        }
    }
    return out;
}

inline std::vector<Finding> evaluate(const EstimateReportMsg& report,
                                     const std::optional<AlignedWorld>& world,
                                     const MatchCriteria& criteria) {
    std::vector<Finding> findings;

    if (world && criteria.enable_derived_state) {
        bool vehicle_present = false;
        for (const auto& e : world->entities)
            vehicle_present = vehicle_present || e.state.entity_id == report.entity_id;
        if (vehicle_present) {
            const auto hazard = classify_hazard(world->entities, report.entity_id, criteria.hazard);
            if (criteria.mismatch(report.derived_state, hazard)) {
                Finding f;
                f.criterion = CriterionTag::DerivedState;
                std::ostringstream d;
                d << to_string(report.derived_state) << " vs " << to_string(hazard);
                f.detail = d.str();
                findings.push_back(f);
            }
        }
    }

    if (world && criteria.enable_position) {
        const auto check = check_positions(report, *world, criteria);
        for (const auto& [est_idx, err] : check.over_tolerance) {
            Finding f;
            f.criterion = CriterionTag::Position;
            f.magnitude = err;
            std::ostringstream d;
            d << "estimate " << est_idx << " (" << to_string(report.estimates[est_idx].cls)
              << ") off by " << err << " m > " << criteria.position_tolerance_m << " m";
            f.detail = d.str();
            findings.push_back(f);
        }
        for (const auto id : check.missed_entity_ids) {
            Finding f;
            f.criterion = CriterionTag::Position;
            std::ostringstream d;
            d << "entity " << id << " in corridor but not matched by any estimate";
            f.detail = d.str();
            findings.push_back(f);
        }
    }

    if (criteria.enable_staleness && criteria.assume_shared_clock &&
        report.t_estimate_us > report.t_render_us) {
        const double age_ms =
            static_cast<double>(report.t_estimate_us - report.t_render_us) / 1000.0;
        if (age_ms > criteria.staleness_threshold_ms) {
            Finding f;
            f.criterion = CriterionTag::Staleness;
            f.magnitude = age_ms;
            std::ostringstream d;
            d << "pipeline age " << age_ms << " ms > " << criteria.staleness_threshold_ms << " ms";
            f.detail = d.str();
            findings.push_back(f);
        }
    }
    return findings;
}

} // namespace ccsim
