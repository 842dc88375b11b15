#include "verloc/confidence.hpp"

#include <cmath>

#include "verloc/common.hpp"

namespace verloc::conf {

bool direction_within_bounds(const prop::Model& m, double distance_km,
                             double rtt_ms, double tolerance) {
    require(std::isfinite(distance_km) && distance_km >= 0.0,
            "distance must be non-negative");
    require(std::isfinite(rtt_ms) && rtt_ms > 0.0, "rtt must be positive");
    require(tolerance >= 0.0 && tolerance < 1.0, "tolerance must lie in [0, 1)");

    const double speed = distance_km / rtt_ms;
    return speed >= prop::lower_speed_bound(m, distance_km, tolerance) &&
           speed <= prop::upper_speed_bound(m, distance_km);
}

bool pair_within_bounds(const prop::Model& m, const PairTiming& pair,
                        double tolerance) {
    return direction_within_bounds(m, pair.claimed_distance_km, pair.rtt_out_ms,
                                   tolerance) &&
           direction_within_bounds(m, pair.claimed_distance_km, pair.rtt_in_ms,
                                   tolerance);
}

double confidence_score(const prop::Model& m, const std::vector<PairTiming>& pairs,
                        double tolerance) {
    if (pairs.empty()) return 0.0;
    std::size_t passing = 0;
    for (const PairTiming& p : pairs)
        if (pair_within_bounds(m, p, tolerance)) ++passing;
    return static_cast<double>(passing) / static_cast<double>(pairs.size());
}

bool accept(double score, double threshold) {
    require(std::isfinite(score) && score >= 0.0 && score <= 1.0,
            "score must lie in [0, 1]");
    require(threshold >= 0.0 && threshold <= 1.0,
            "threshold must lie in [0, 1]");
    return score >= threshold;
}

} // namespace verloc::conf
