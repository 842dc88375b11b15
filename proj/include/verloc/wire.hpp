#pragma once

// Compact wire format for reported measurements. One record carries a
// 20-bit reference id and a 20-bit RTT in microseconds, packed big-endian
// into 5 bytes:
//
//   byte 0: id[19..12]
//   byte 1: id[11..4]
//   byte 2: id[3..0] << 4 | rtt[19..16]
//   byte 3: rtt[15..8]
//   byte 4: rtt[7..0]
//
// A measurement epoch for one node is its record list concatenated; the
// decoder is the exact inverse. Conversion from model time (fractional
// milliseconds) rounds to the nearest microsecond and saturates at the
// 20-bit ceiling (~1.05 s, far beyond any plausible RTT).

#include <array>
#include <cstdint>
#include <vector>

namespace verloc::wire {

inline constexpr std::uint32_t kFieldMax = (1u << 20) - 1;

struct MeasurementRecord {
    std::uint32_t ref_id = 0; // 20-bit
    std::uint32_t rtt_us = 0; // 20-bit
    bool operator==(const MeasurementRecord&) const = default;
};

using Packed = std::array<std::uint8_t, 5>;

// Both fields must fit in 20 bits; throws otherwise.
Packed encode(const MeasurementRecord& record);
MeasurementRecord decode(const Packed& bytes);

// Millisecond RTT to the saturating microsecond field.
std::uint32_t rtt_us_from_ms(double rtt_ms);
double rtt_ms_from_us(std::uint32_t rtt_us);

std::vector<std::uint8_t> encode_all(const std::vector<MeasurementRecord>& records);
std::vector<MeasurementRecord> decode_all(const std::vector<std::uint8_t>& bytes);

} // namespace verloc::wire
