/**
 * Persisted corner cases. The mismatch "database" is an append-only log
 * of framed binary records (mismatches.bin) using the same encodings as
 * the wire, plus a newline-delimited index (mismatches.index) with one
 * summary line per record. docs/mismatch-log.md is the byte-exact
 * reference.
 */
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ccsim/detector/criteria.hpp"
#include "ccsim/proto/messages.hpp"

namespace ccsim {

constexpr std::uint8_t kRecordMagic[4] = {'C', 'C', 'M', 'R'};

struct TimingTrace {
    std::uint64_t t_render_us = 0;   // t0: frame creation
    std::uint64_t t_estimate_us = 0; // t0': information ready
    std::uint64_t t_ingest_us = 0;   // detector receipt

    std::uint64_t pipeline_age_us() const {
        return t_estimate_us > t_render_us ? t_estimate_us - t_render_us : 0;
    }
};

struct MismatchRecord {
    std::uint64_t record_id = 0;
    CriterionTag criterion = CriterionTag::DerivedState;
    std::string detail;
    std::uint64_t sim_time_us = 0;
    std::uint32_t client_id = 0;
    std::uint32_t entity_id = 0;
    TimingTrace timing;
    std::string scenario_name;
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> manifest;
    // full buffered history at the mismatch instant, per entity, time-ordered
    std::vector<std::pair<std::uint32_t, std::vector<EntityState>>> gt_window;
    std::vector<EstimateReportMsg> estimate_window; // newest last = the trigger

    // span of the ground-truth window in simulated time
    std::uint64_t gt_span_us() const {
        std::uint64_t lo = UINT64_MAX, hi = 0;
        for (const auto& [id, states] : gt_window) {
            if (states.empty()) continue;
            lo = std::min(lo, states.front().sim_time_us);
            hi = std::max(hi, states.back().sim_time_us);
        }
        return hi > lo ? hi - lo : 0;
    }
};

inline std::vector<std::uint8_t> encode_mismatch_record(const MismatchRecord& r) {
    ByteWriter w;
    w.put_u64(r.record_id);
    w.put_u8(static_cast<std::uint8_t>(r.criterion));
    w.put_string8(r.detail.substr(0, 255));
    w.put_u64(r.sim_time_us);
    w.put_u32(r.client_id);
    w.put_u32(r.entity_id);
    w.put_u64(r.timing.t_render_us);
    w.put_u64(r.timing.t_estimate_us);
    w.put_u64(r.timing.t_ingest_us);
    w.put_string8(r.scenario_name.substr(0, 255));
    w.put_u64(r.seed);
    w.put_u16(static_cast<std::uint16_t>(r.manifest.size()));
    for (const auto& e : r.manifest) {
        w.put_u32(e.entity_id);
        w.put_u8(static_cast<std::uint8_t>(e.cls));
        w.put_f32(e.extent_x);
        w.put_f32(e.extent_y);
        w.put_f32(e.real_height);
        w.put_u8(e.client_controlled);
    }
    w.put_u32(static_cast<std::uint32_t>(r.gt_window.size()));
    for (const auto& [id, states] : r.gt_window) {
        w.put_u32(id);
        w.put_u32(static_cast<std::uint32_t>(states.size()));
        for (const auto& s : states) w.put_bytes(encode_state_update(s));
    }
    w.put_u32(static_cast<std::uint32_t>(r.estimate_window.size()));
    for (const auto& rep : r.estimate_window) {
        const auto payload = encode_estimate_report(rep);
        w.put_u32(static_cast<std::uint32_t>(payload.size()));
        w.put_bytes(payload);
    }
    return w.take();
}

inline MismatchRecord decode_mismatch_record(std::span<const std::uint8_t> body) {
    ByteReader rd(body);
    MismatchRecord r;
    r.record_id = rd.get_u64();
    r.criterion = static_cast<CriterionTag>(rd.get_u8());
    r.detail = rd.get_string8();
    r.sim_time_us = rd.get_u64();
    r.client_id = rd.get_u32();
    r.entity_id = rd.get_u32();
    r.timing.t_render_us = rd.get_u64();
    r.timing.t_estimate_us = rd.get_u64();
    r.timing.t_ingest_us = rd.get_u64();
    r.scenario_name = rd.get_string8();
    r.seed = rd.get_u64();
    const size_t nm = rd.get_u16();
    for (size_t i = 0; i < nm; ++i) {
        ManifestEntry e;
        e.entity_id = rd.get_u32();
        e.cls = static_cast<EntityClass>(rd.get_u8());
        e.extent_x = rd.get_f32();
        e.extent_y = rd.get_f32();
        e.real_height = rd.get_f32();
        e.client_controlled = rd.get_u8();
        r.manifest.push_back(e);
    }
    const std::uint32_t ne = rd.get_u32();
    for (std::uint32_t i = 0; i < ne; ++i) {
        const std::uint32_t id = rd.get_u32();
        const std::uint32_t ns = rd.get_u32();
        std::vector<EntityState> states;
        states.reserve(ns);
        for (std::uint32_t k = 0; k < ns; ++k)
            states.push_back(decode_state_update(rd.get_bytes(48)));
        r.gt_window.emplace_back(id, std::move(states));
    }
    const std::uint32_t nr = rd.get_u32();
    for (std::uint32_t i = 0; i < nr; ++i) {
        const std::uint32_t len = rd.get_u32();
        r.estimate_window.push_back(decode_estimate_report(rd.get_bytes(len)));
    }
    rd.expect_done();
    return r;
}

// One summary line per record, newline-delimited structured text.
inline std::string index_line(const MismatchRecord& r) {
    std::ostringstream o;
    o << "record=" << r.record_id << " criterion=" << to_string(r.criterion)
      << " sim_t=" << static_cast<double>(r.sim_time_us) * 1e-6 << " client=" << r.client_id
      << " entity=" << r.entity_id << " pipeline_age_ms="
      << static_cast<double>(r.timing.pipeline_age_us()) / 1000.0 << " scenario="
      << r.scenario_name << " seed=" << r.seed << " detail=\"" << r.detail << "\"";
    return o.str();
}

class MismatchLogWriter {
public:
    explicit MismatchLogWriter(const std::string& dir)
        : bin_path_(dir + "/mismatches.bin"), index_path_(dir + "/mismatches.index") {}

    const std::string& bin_path() const { return bin_path_; }

    // Append-only; flushes both files per record so a crash loses at most
    // the record being written.
    bool append(const MismatchRecord& r) {
        const auto body = encode_mismatch_record(r);
        std::ofstream bin(bin_path_, std::ios::binary | std::ios::app);
        if (!bin) return false;
        bin.write(reinterpret_cast<const char*>(kRecordMagic), 4);
        const std::uint32_t len = static_cast<std::uint32_t>(body.size());
        std::uint8_t len_le[4] = {static_cast<std::uint8_t>(len & 0xff),
                                  static_cast<std::uint8_t>((len >> 8) & 0xff),
                                  static_cast<std::uint8_t>((len >> 16) & 0xff),
                                  static_cast<std::uint8_t>((len >> 24) & 0xff)};
        bin.write(reinterpret_cast<const char*>(len_le), 4);
        bin.write(reinterpret_cast<const char*>(body.data()), static_cast<long>(body.size()));
        bin.flush();
        if (!bin) return false;
        std::ofstream idx(index_path_, std::ios::app);
        idx << index_line(r) << "\n";
        return true;
    }

private:
    std::string bin_path_;
    std::string index_path_;
};

struct MismatchLog {
    std::vector<MismatchRecord> records;
    bool truncated = false; // the file ended inside a record
};

inline MismatchLog read_mismatch_log(const std::string& path) {
    MismatchLog out;
    std::ifstream f(path, std::ios::binary);
    if (!f) return out;
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    size_t pos = 0;
    while (pos + 8 <= data.size()) {
        if (!(data[pos] == 'C' && data[pos + 1] == 'C' && data[pos + 2] == 'M' &&
              data[pos + 3] == 'R')) {
            out.truncated = true;
            break;
        }
        std::uint32_t len = 0;
        for (int i = 0; i < 4; ++i)
            len |= static_cast<std::uint32_t>(data[pos + 4 + i]) << (8 * i);
        if (pos + 8 + len > data.size()) {
            out.truncated = true;
            break;
        }
        try {
            out.records.push_back(decode_mismatch_record(
                std::span<const std::uint8_t>(data.data() + pos + 8, len)));
        } catch (const ProtoError&) {
            out.truncated = true;
            break;
        }
        pos += 8 + len;
    }
    if (pos != data.size() && !out.truncated) out.truncated = true;
    return out;
}

} // namespace ccsim
