/**
 * Mismatch-matching criteria. The state table maps (derived state, ground
 * truth hazard) pairs to OK/Mismatch; the default marks SafeToDrive under
 * CollisionPossible or Collision, and SlowDown under Collision, as
 * mismatches. Stop never mismatches. All knobs load from a criteria file
 * in the key/value grammar.
 */
#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ccsim/proto/messages.hpp"
#include "ccsim/world/scenario.hpp"
#include "ccsim/world/types.hpp"

namespace ccsim {

enum class CriterionTag : std::uint8_t { DerivedState = 0, Position = 1, Staleness = 2 };

inline const char* to_string(CriterionTag t) {
    switch (t) {
        case CriterionTag::DerivedState: return "derived_state";
        case CriterionTag::Position: return "position";
        case CriterionTag::Staleness: return "staleness";
    }
    return "?";
}

struct MatchCriteria {
    // state_table[derived][hazard] -> mismatch?
    bool state_table[3][3] = {
        {false, true, true},   // SafeToDrive x {Safe, CollisionPossible, Collision}
        {false, false, true},  // SlowDown
        {false, false, false}, // Stop
    };
    double position_tolerance_m = 2.0;
    bool class_must_match = true;
    double staleness_threshold_ms = 100.0;
    double debounce_s = 2.0;
    // gate for missed-object findings: ground-truth entities inside the
    // client's corridor and within this forward range must be matched
    double corridor_halfwidth_m = 2.0;
    double missed_range_m = 15.0;
    HazardParams hazard; // must mirror the simulation's parameters
    bool enable_derived_state = true;
    bool enable_position = true;
    bool enable_staleness = true;
    // timing comparison is meaningful only within one clock domain
    bool assume_shared_clock = true;

    bool mismatch(DerivedState d, GroundTruthHazard h) const {
        return state_table[static_cast<int>(d)][static_cast<int>(h)];
    }
};

namespace detail {

inline DerivedState parse_derived(const std::string& s, int line) {
    if (s == "SafeToDrive") return DerivedState::SafeToDrive;
    if (s == "SlowDown") return DerivedState::SlowDown;
    if (s == "Stop") return DerivedState::Stop;
    throw std::runtime_error("criteria:" + std::to_string(line) + ": unknown derived state '" + s + "'");
}

inline GroundTruthHazard parse_hazard(const std::string& s, int line) {
    if (s == "Safe") return GroundTruthHazard::Safe;
    if (s == "CollisionPossible") return GroundTruthHazard::CollisionPossible;
    if (s == "Collision") return GroundTruthHazard::Collision;
    throw std::runtime_error("criteria:" + std::to_string(line) + ": unknown hazard '" + s + "'");
}

} // namespace detail

inline MatchCriteria parse_criteria(const std::string& text) {
    MatchCriteria c;
    bool table_reset = false;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("criteria:" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        auto toks = detail::split_ws(val);
        if (key == "position_tolerance_m") c.position_tolerance_m = detail::parse_num(val, line_no);
        else if (key == "staleness_threshold_ms") c.staleness_threshold_ms = detail::parse_num(val, line_no);
        else if (key == "debounce_s") c.debounce_s = detail::parse_num(val, line_no);
        else if (key == "class_must_match") c.class_must_match = (val == "true" || val == "1");
        else if (key == "corridor_halfwidth_m") c.corridor_halfwidth_m = detail::parse_num(val, line_no);
        else if (key == "missed_range_m") c.missed_range_m = detail::parse_num(val, line_no);
        else if (key == "hazard_corridor_halfwidth_m") c.hazard.corridor_halfwidth = static_cast<float>(detail::parse_num(val, line_no));
        else if (key == "hazard_margin_m") c.hazard.margin = static_cast<float>(detail::parse_num(val, line_no));
        else if (key == "hazard_a_brake") c.hazard.a_brake = static_cast<float>(detail::parse_num(val, line_no));
        else if (key == "assume_shared_clock") c.assume_shared_clock = (val == "true" || val == "1");
        else if (key == "enable") {
            c.enable_derived_state = c.enable_position = c.enable_staleness = false;
            for (const auto& t : toks) {
                if (t == "derived_state") c.enable_derived_state = true;
                else if (t == "position") c.enable_position = true;
                else if (t == "staleness") c.enable_staleness = true;
                else fail("unknown criterion '" + t + "'");
            }
        } else if (key == "table") {
            if (toks.size() != 3) fail("table wants: DerivedState Hazard ok|mismatch");
            if (!table_reset) {
                // an explicit table overrides the default completely
                for (auto& row : c.state_table)
                    for (auto& cell : row) cell = false;
                table_reset = true;
            }
            const auto d = detail::parse_derived(toks[0], line_no);
            const auto h = detail::parse_hazard(toks[1], line_no);
            if (toks[2] != "ok" && toks[2] != "mismatch") fail("table entry must be ok|mismatch");
            c.state_table[static_cast<int>(d)][static_cast<int>(h)] = (toks[2] == "mismatch");
        } else fail("unknown criteria key '" + key + "'");
    }
    if (c.position_tolerance_m <= 0.0) throw std::runtime_error("criteria: position_tolerance_m must be > 0");
    if (c.staleness_threshold_ms <= 0.0) throw std::runtime_error("criteria: staleness_threshold_ms must be > 0");
    return c;
}

inline MatchCriteria load_criteria_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open criteria file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_criteria(ss.str());
}

} // namespace ccsim
