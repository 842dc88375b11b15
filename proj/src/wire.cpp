#include "verloc/wire.hpp"

#include <cmath>

#include "verloc/common.hpp"

namespace verloc::wire {

Packed encode(const MeasurementRecord& record) {
    require(record.ref_id <= kFieldMax, "wire: reference id exceeds 20 bits");
    require(record.rtt_us <= kFieldMax, "wire: rtt exceeds 20 bits");
    const std::uint32_t id = record.ref_id;
    const std::uint32_t rtt = record.rtt_us;
    return Packed{
        static_cast<std::uint8_t>(id >> 12),
        static_cast<std::uint8_t>((id >> 4) & 0xff),
        static_cast<std::uint8_t>(((id & 0x0f) << 4) | (rtt >> 16)),
        static_cast<std::uint8_t>((rtt >> 8) & 0xff),
        static_cast<std::uint8_t>(rtt & 0xff),
    };
}

MeasurementRecord decode(const Packed& b) {
    MeasurementRecord r;
    r.ref_id = (static_cast<std::uint32_t>(b[0]) << 12) |
               (static_cast<std::uint32_t>(b[1]) << 4) |
               (static_cast<std::uint32_t>(b[2]) >> 4);
    r.rtt_us = (static_cast<std::uint32_t>(b[2] & 0x0f) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 8) |
               static_cast<std::uint32_t>(b[4]);
    return r;
}

std::uint32_t rtt_us_from_ms(double rtt_ms) {
    require(rtt_ms >= 0.0 && std::isfinite(rtt_ms),
            "wire: rtt must be finite and non-negative");
    const double us = std::round(rtt_ms * 1000.0);
    if (us >= static_cast<double>(kFieldMax)) return kFieldMax;
    return static_cast<std::uint32_t>(us);
}

double rtt_ms_from_us(std::uint32_t rtt_us) {
    return static_cast<double>(rtt_us) / 1000.0;
}

std::vector<std::uint8_t>
encode_all(const std::vector<MeasurementRecord>& records) {
    std::vector<std::uint8_t> out;
    out.reserve(records.size() * 5);
    for (const auto& r : records) {
        const Packed p = encode(r);
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

std::vector<MeasurementRecord>
decode_all(const std::vector<std::uint8_t>& bytes) {
    require(bytes.size() % 5 == 0,
            "wire: byte stream length must be a multiple of 5");
    std::vector<MeasurementRecord> out;
    out.reserve(bytes.size() / 5);
    for (std::size_t i = 0; i < bytes.size(); i += 5) {
        Packed p;
        std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(i),
                  bytes.begin() + static_cast<std::ptrdiff_t>(i) + 5, p.begin());
        out.push_back(decode(p));
    }
    return out;
}

} // namespace verloc::wire
