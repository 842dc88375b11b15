#pragma once

// Adversary simulation. A colluding set of nodes tries to pass location
// verification for positions they do not occupy. What they can do to a
// measurement depends on who sits at the other end:
//
//  - Both endpoints adversarial: both directions are fabricated outright,
//    mutually consistent with the claimed positions (perfect
//    manipulation). Nothing ties the values to physics.
//  - Honest reference, claimed distance beyond the true one: the claimer
//    spoofs its own reported direction and delays its echoes to the
//    honest prober so the honest-side RTT matches the farther claim
//    (slow-down). Achieved delay is noisy and can only add: replies never
//    arrive earlier than the honest path delivers them.
//  - Honest reference, claimed distance short of the true one: the
//    claimer still spoofs its own report, but no manipulation can shrink
//    the honest side's RTT below physics.
//
// Rewrites are keyed per unordered pair from an attack seed, so a pair's
// fabricated values do not depend on what happens to any other pair.

#include <cstdint>

#include "verloc/common.hpp"
#include "verloc/geo.hpp"
#include "verloc/netgen.hpp"
#include "verloc/propagation.hpp"

namespace verloc::adv {

enum class AttackCase : std::uint8_t {
    Untouched,      // no claiming adversary on the pair
    NoManipulation, // claim is nearer than truth; honest side stays honest
    SlowDown,       // claim is farther; honest side gets delayed echoes
    Perfect,        // both ends adversarial, both directions fabricated
};

AttackCase classify(const net::NodeDescriptor& x, const net::NodeDescriptor& y);

struct AttackOptions {
    double perfect_jitter = 0.021; // one-sided spread on fabricated pairs
    double report_jitter = 0.035;  // one-sided spread on self-reported RTTs
    double delay_jitter = 0.07;    // symmetric error on achieved delays
};

// RTT an adversary fabricates for a claimed distance: the model floor plus
// a non-negative fraction, so the value never implies impossible speed.
double spoofed_rtt(const prop::Model& m, double claimed_km, double jitter);

// Flags `count` nodes as adversarial. The underlying shuffled order is a
// function of (network size, seed) alone, so a smaller count always marks
// a prefix of a larger one.
void mark_adversaries(net::Network& network, std::size_t count, Seed seed);

// The first `count` adversaries (same order as mark_adversaries) claim a
// fresh area-uniform location in a uniformly chosen foreign zone. Claim
// draws are keyed per node, so growing the claiming set never moves the
// claims of earlier nodes.
void assign_false_claims(net::Network& network, const geo::ZoneMap& map,
                         std::size_t count, Seed seed);

// Undo claims: claimed location reverts to truth, claiming flags clear.
void reset_claims(net::Network& network);

// Rewrites measurements in place per the case table above.
void apply_attack(const prop::Model& m, const net::Network& network,
                  net::MeasurementSet& measurements, Seed attack_seed,
                  const AttackOptions& options = {});

} // namespace verloc::adv
