#pragma once

// Zone verification: decide whether a node's claimed zone is consistent
// with its reference measurements, without trusting the node's own claim.
//
// Each reference caps the node's possible position: even at the fastest
// plausible transmission speed, a reply within rtt cannot have come from
// farther than max_distance_km(rtt). Intersecting the caps over a lat/lon
// lattice yields the target area. References apply in ascending cap order
// (tightest first) and stop early once a cap stops shrinking the set,
// since every later cap is wider.
//
// Every surviving point is then scored by the same weighted RMSE the
// localizer minimizes, mapped through exp(-(rmse - min rmse)) and
// normalized to sum to one. Zone masses aggregate point scores by
// containing zone; the claimed zone is verified iff it carries the
// largest mass. The exponential falls off within a few km of the best
// point, so far points carry no mass; verify_zone exploits that with a
// coarse-to-fine sweep whose pruning margin provably cannot discard any
// point with mass above double precision.

#include <string>
#include <string_view>
#include <vector>

#include "verloc/geo.hpp"
#include "verloc/localize.hpp"
#include "verloc/propagation.hpp"

namespace verloc::zone {

// Upper bound on source distance for a reply that took rtt_ms.
double max_distance_km(double rtt_ms);

struct Options {
    double resolution_deg = 0.2;
    double min_shrink = 0.01; // stop once a cap removes less than this
    double lat_clamp_deg = 89.0;
};

struct TargetArea {
    std::vector<geo::GeoPoint> points;
    double resolution_deg = 0.0;
    std::size_t caps_applied = 0;
};

TargetArea target_area(const std::vector<loc::RefObservation>& observations,
                       const Options& options = {});

// exp(-(rmse - min rmse)) over the area's points, normalized to sum 1.
// Empty input yields an empty vector.
std::vector<double> score_area(const prop::Model& model,
                               const std::vector<loc::RefObservation>& observations,
                               const TargetArea& area);

struct ZoneMass {
    std::string zone_id;
    double mass = 0.0;
};

struct Decision {
    bool verified = false;
    std::string winner;    // empty when the target area is empty
    double winner_mass = 0.0;
    double claimed_mass = 0.0;
    double unzoned_mass = 0.0; // mass on points outside every zone
    std::vector<ZoneMass> masses; // sorted by zone id
    std::size_t area_points = 0;
};

// Ties on the winning mass resolve to the lexicographically first zone id.
Decision verify_zone(const prop::Model& model, const geo::ZoneMap& map,
                     const std::vector<loc::RefObservation>& observations,
                     std::string_view claimed_zone,
                     const Options& options = {});

// Reference implementation of verify_zone without the coarse-to-fine
// pruning; slower but structurally simple. Used to validate the fast path.
Decision verify_zone_exact(const prop::Model& model, const geo::ZoneMap& map,
                           const std::vector<loc::RefObservation>& observations,
                           std::string_view claimed_zone,
                           const Options& options = {});

} // namespace verloc::zone
