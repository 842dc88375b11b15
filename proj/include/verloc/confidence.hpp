#pragma once

// Confidence scoring: the self-policing half of verification. For every
// reference pair the node's claimed distance and the two directed RTTs
// imply two transmission speeds; each must fall inside the model's
// per-distance band [lower_speed_bound, upper_speed_bound]. The score is
// the fraction of pairs whose both directions pass, and a claim is
// accepted only when the score reaches the decision threshold.
//
// Lying stretches one side of the band or the other: inflating distance
// pushes implied speeds above what the claimed distance supports, added
// delay pushes them below the tolerated floor. Honest nodes land inside
// often enough to clear the threshold; see the experiment harness for the
// calibrated separation.

#include <vector>

#include "verloc/propagation.hpp"

namespace verloc::conf {

inline constexpr double kDefaultTolerance = 0.01; // lower-bound relaxation
inline constexpr double kDefaultThreshold = 0.2;  // minimum accepted score

struct PairTiming {
    double claimed_distance_km = 0.0; // between the two claimed positions
    double rtt_out_ms = 0.0;          // this node's probe, as measured by it
    double rtt_in_ms = 0.0;           // the reference's probe of this node
};

bool direction_within_bounds(const prop::Model& m, double distance_km,
                             double rtt_ms, double tolerance = kDefaultTolerance);

bool pair_within_bounds(const prop::Model& m, const PairTiming& pair,
                        double tolerance = kDefaultTolerance);

// Fraction of pairs passing both directions; zero when there are none.
double confidence_score(const prop::Model& m, const std::vector<PairTiming>& pairs,
                        double tolerance = kDefaultTolerance);

// Inclusive comparison, so a score exactly at the threshold is accepted.
bool accept(double score, double threshold = kDefaultThreshold);

} // namespace verloc::conf
