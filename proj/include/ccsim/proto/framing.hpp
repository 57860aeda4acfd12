/**
 * Message framing: 8-byte header (magic 0xC0 0xCA, version, type, u32
 * payload length) followed by the body. The stream parser tolerates
 * arbitrary read boundaries and resynchronizes on corrupt headers by
 * scanning for the next magic pair.
 */
#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "ccsim/proto/wire.hpp"

namespace ccsim {

constexpr std::uint8_t kMagic0 = 0xC0;
constexpr std::uint8_t kMagic1 = 0xCA;
constexpr std::uint8_t kProtoVersion = 1;
constexpr std::uint32_t kMaxPayloadLen = 16u * 1024u * 1024u;
constexpr size_t kHeaderBytes = 8;

enum class MsgType : std::uint8_t {
    Hello = 1,
    SensorFrame = 2,
    ControlCmd = 3,
    StateUpdateBatch = 4,
    EstimateReport = 5,
    InferRequest = 6,
    InferResponse = 7,
    Ack = 8,
    Bye = 9,
};

inline bool valid_msg_type(std::uint8_t t) {
    return t >= static_cast<std::uint8_t>(MsgType::Hello) &&
           t <= static_cast<std::uint8_t>(MsgType::Bye);
}

struct Message {
    MsgType type = MsgType::Ack;
    std::vector<std::uint8_t> payload;
};

inline std::vector<std::uint8_t> frame_message(MsgType type,
                                               std::span<const std::uint8_t> payload) {
    if (payload.size() > kMaxPayloadLen) throw ProtoError("payload exceeds 16 MiB bound");
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + payload.size());
    out.push_back(kMagic0);
    out.push_back(kMagic1);
    out.push_back(kProtoVersion);
    out.push_back(static_cast<std::uint8_t>(type));
    const auto len = static_cast<std::uint32_t>(payload.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xff));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

// Incremental parser. Feed bytes as they arrive; next() yields complete
// messages in order and std::nullopt when more bytes are needed. One
// instance owns its buffer and is used from one thread at a time.
class StreamParser {
public:
    void feed(std::span<const std::uint8_t> bytes) {
        buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    }

    std::optional<Message> next() {
        for (;;) {
            if (buf_.size() - pos_ < kHeaderBytes) {
                compact();
                return std::nullopt;
            }
            if (buf_[pos_] != kMagic0 || buf_[pos_ + 1] != kMagic1) {
                resync();
                continue;
            }
            const std::uint8_t version = buf_[pos_ + 2];
            const std::uint8_t type = buf_[pos_ + 3];
            std::uint32_t len = 0;
            for (int i = 0; i < 4; ++i)
                len |= static_cast<std::uint32_t>(buf_[pos_ + 4 + i]) << (8 * i);
            if (version != kProtoVersion) {
                ++bad_version_;
                resync();
                continue;
            }
            if (!valid_msg_type(type)) {
                ++bad_type_;
                resync();
                continue;
            }
            if (len > kMaxPayloadLen) {
                ++oversize_;
                resync();
                continue;
            }
            if (buf_.size() - pos_ < kHeaderBytes + len) {
                compact();
                return std::nullopt; // need more bytes
            }
            Message m;
            m.type = static_cast<MsgType>(type);
            m.payload.assign(buf_.begin() + static_cast<long>(pos_ + kHeaderBytes),
                             buf_.begin() + static_cast<long>(pos_ + kHeaderBytes + len));
            pos_ += kHeaderBytes + len;
            return m;
        }
    }

    std::uint64_t resyncs() const { return resyncs_; }
    std::uint64_t bad_version() const { return bad_version_; }
    std::uint64_t bad_type() const { return bad_type_; }
    std::uint64_t oversize() const { return oversize_; }
    size_t buffered() const { return buf_.size() - pos_; }

private:
    // Skip forward to the next candidate magic pair. A lone trailing 0xC0
    // is kept: its partner may arrive in the next read.
    void resync() {
        ++resyncs_;
        size_t i = pos_ + 1;
        while (i + 1 < buf_.size() && !(buf_[i] == kMagic0 && buf_[i + 1] == kMagic1)) ++i;
        if (i + 1 < buf_.size())
            pos_ = i;
        else
            pos_ = (!buf_.empty() && buf_.back() == kMagic0) ? buf_.size() - 1 : buf_.size();
        compact();
    }

    void compact() {
        if (pos_ > 0) {
            buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(pos_));
            pos_ = 0;
        }
    }

    std::vector<std::uint8_t> buf_;
    size_t pos_ = 0;
    std::uint64_t resyncs_ = 0;
    std::uint64_t bad_version_ = 0;
    std::uint64_t bad_type_ = 0;
    std::uint64_t oversize_ = 0;
};

} // namespace ccsim
