#pragma once

// Pseudorandom measurement scheduling. After an epoch's descriptors are
// fixed, a public random beacon fixes every node's hash
//     h_i = SHA-256(beacon || pk_i)
// and each node derives its initial reference picks by walking a hash
// chain: interpret the current digest as a big-endian integer mod N, skip
// itself and repeats, rehash, until t picks are made. The full schedule is
// the symmetric completion: j measures i whenever i measures j. Everyone
// can recompute everyone's set, so deviating from the schedule is
// detectable; nobody can choose their own references.
//
// The realized reference-set size |R_i| = t + t' where t' counts nodes
// that picked i without being picked back; t' is Binomial(N - t, ~t/N).
// reference_size_tail() evaluates P(|R_i| >= R) exactly (log-space sum),
// which is how a deployment sizes t for a target reference count.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "verloc/common.hpp"

namespace verloc::sched {

using Digest = std::array<std::uint8_t, 32>;
using Bytes = std::vector<std::uint8_t>;

Digest sha256(const std::uint8_t* data, std::size_t size);
Digest sha256(const Bytes& data);

// h_i = SHA-256(beacon || pk). Both arguments are raw byte strings.
Digest node_hash(const Bytes& beacon, const Bytes& pk);

// Big-endian digest value mod n (Horner over the 32 bytes).
std::uint32_t digest_mod(const Digest& digest, std::uint32_t n);

// Initial picks for node `self` of `n` nodes, in pick order. Walks the
// hash chain, skipping self and duplicates, until t distinct picks exist.
// Requires t < n.
std::vector<std::uint32_t> initial_references(const Digest& h,
                                              std::uint32_t self,
                                              std::uint32_t n, std::uint32_t t);

struct Schedule {
    std::uint32_t n = 0;
    std::uint32_t t = 0;
    // refs[i]: sorted ascending, self-free, symmetric (j in refs[i] iff
    // i in refs[j]).
    std::vector<std::vector<std::uint32_t>> refs;
};

// Builds the symmetric schedule for an epoch. Public keys must be sorted
// ascending and distinct: the sort order defines the node indices, and a
// duplicate key would collapse two identities.
Schedule build_schedule(const Bytes& beacon, const std::vector<Bytes>& pks,
                        std::uint32_t t);

bool is_symmetric(const Schedule& s);

// P(|R_i| >= r) where |R_i| = t + Binomial(n - t, t / n): each of the
// n - t nodes that i did not pick picks i with probability ~t/n. Exact
// summation in log space; stable for n in the millions.
double reference_size_tail(std::uint32_t n, std::uint32_t t, std::uint32_t r);

// E[|R_i|] = t + (n - t) * t / n.
double mean_reference_count(std::uint32_t n, std::uint32_t t);

// Smallest t whose mean reference count reaches the target.
std::uint32_t pick_t_for_mean(std::uint32_t n, double target_mean);

Bytes hex_to_bytes(const std::string& hex);
std::string bytes_to_hex(const Bytes& bytes);

} // namespace verloc::sched
