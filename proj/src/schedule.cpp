#include "verloc/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <openssl/evp.h>

namespace verloc::sched {

Digest sha256(const std::uint8_t* data, std::size_t size) {
    Digest out{};
    unsigned int written = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("sha256: context allocation failed");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, data, size) == 1 &&
                    EVP_DigestFinal_ex(ctx, out.data(), &written) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok || written != out.size())
        throw std::runtime_error("sha256: digest computation failed");
    return out;
}

Digest sha256(const Bytes& data) { return sha256(data.data(), data.size()); }

Digest node_hash(const Bytes& beacon, const Bytes& pk) {
    require(!beacon.empty(), "node_hash: beacon must not be empty");
    require(!pk.empty(), "node_hash: public key must not be empty");
    Bytes joined;
    joined.reserve(beacon.size() + pk.size());
    joined.insert(joined.end(), beacon.begin(), beacon.end());
    joined.insert(joined.end(), pk.begin(), pk.end());
    return sha256(joined);
}

std::uint32_t digest_mod(const Digest& digest, std::uint32_t n) {
    require(n > 0, "digest_mod: modulus must be positive");
    // Horner over big-endian bytes; the accumulator never exceeds
    // (n-1)*256 + 255 < 2^40, safe in 64 bits.
    std::uint64_t acc = 0;
    for (std::uint8_t byte : digest) acc = (acc * 256 + byte) % n;
    return static_cast<std::uint32_t>(acc);
}

std::vector<std::uint32_t> initial_references(const Digest& h,
                                              std::uint32_t self,
                                              std::uint32_t n,
                                              std::uint32_t t) {
    require(n > 0, "initial_references: n must be positive");
    require(self < n, "initial_references: self index out of range");
    require(t < n, "initial_references: t must be below n");
    std::vector<std::uint32_t> picks;
    picks.reserve(t);
    std::set<std::uint32_t> seen;
    Digest y = h;
    while (picks.size() < t) {
        const std::uint32_t r = digest_mod(y, n);
        if (r != self && seen.insert(r).second) picks.push_back(r);
        y = sha256(y.data(), y.size());
    }
    return picks;
}

Schedule build_schedule(const Bytes& beacon, const std::vector<Bytes>& pks,
                        std::uint32_t t) {
    const std::uint32_t n = static_cast<std::uint32_t>(pks.size());
    require(n >= 2, "build_schedule: need at least two nodes");
    require(t >= 1 && t < n, "build_schedule: t must be in [1, n)");
    for (std::uint32_t i = 1; i < n; ++i)
        require(pks[i - 1] < pks[i],
                "build_schedule: public keys must be sorted and distinct");

    Schedule s;
    s.n = n;
    s.t = t;
    s.refs.resize(n);

    std::vector<std::set<std::uint32_t>> sets(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const Digest h = node_hash(beacon, pks[i]);
        for (std::uint32_t r : initial_references(h, i, n, t)) {
            sets[i].insert(r);
            sets[r].insert(i); // symmetric completion
        }
    }
    for (std::uint32_t i = 0; i < n; ++i)
        s.refs[i].assign(sets[i].begin(), sets[i].end());
    return s;
}

bool is_symmetric(const Schedule& s) {
    for (std::uint32_t i = 0; i < s.n; ++i) {
        for (std::uint32_t j : s.refs[i]) {
            if (j >= s.n || j == i) return false;
            const auto& back = s.refs[j];
            if (!std::binary_search(back.begin(), back.end(), i)) return false;
        }
    }
    return true;
}

double reference_size_tail(std::uint32_t n, std::uint32_t t, std::uint32_t r) {
    require(n > 0 && t < n, "reference_size_tail: need t < n");
    if (r <= t) return 1.0;
    const std::uint32_t extra_needed = r - t;
    const std::uint32_t trials = n - t;
    if (extra_needed > trials) return 0.0;
    const double p = static_cast<double>(t) / static_cast<double>(n);
    if (p == 0.0) return 0.0;
    const double logp = std::log(p);
    const double logq = std::log1p(-p);
    // Sum the binomial upper tail in log space against the running maximum.
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(trials - extra_needed + 1);
    for (std::uint32_t k = extra_needed; k <= trials; ++k) {
        const double log_term =
            std::lgamma(static_cast<double>(trials) + 1.0) -
            std::lgamma(static_cast<double>(k) + 1.0) -
            std::lgamma(static_cast<double>(trials - k) + 1.0) +
            static_cast<double>(k) * logp +
            static_cast<double>(trials - k) * logq;
        terms.push_back(log_term);
        max_log = std::max(max_log, log_term);
    }
    double sum = 0.0;
    for (double lt : terms) sum += std::exp(lt - max_log);
    return std::min(1.0, std::exp(max_log) * sum);
}

double mean_reference_count(std::uint32_t n, std::uint32_t t) {
    require(n > 0 && t < n, "mean_reference_count: need t < n");
    return static_cast<double>(t) +
           static_cast<double>(n - t) * static_cast<double>(t) /
               static_cast<double>(n);
}

std::uint32_t pick_t_for_mean(std::uint32_t n, double target_mean) {
    require(target_mean > 0.0 && target_mean < static_cast<double>(n),
            "pick_t_for_mean: target out of range");
    for (std::uint32_t t = 1; t < n; ++t)
        if (mean_reference_count(n, t) >= target_mean) return t;
    return n - 1;
}

Bytes hex_to_bytes(const std::string& hex) {
    require(hex.size() % 2 == 0, "hex_to_bytes: odd-length hex string");
    auto nibble = [](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
        throw std::invalid_argument("hex_to_bytes: invalid hex digit");
    };
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2)
        out.push_back(
            static_cast<std::uint8_t>(nibble(hex[i]) << 4 | nibble(hex[i + 1])));
    return out;
}

std::string bytes_to_hex(const Bytes& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

} // namespace verloc::sched
