#include "verloc/zoneverify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>
#include <utility>

#include "verloc/common.hpp"

namespace verloc::zone {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kKmPerDeg = geo::kEarthRadiusKm * kPi / 180.0;

// Points whose RMSE sits this many km above the minimum carry exp(-40)
// ~ 4e-18 of the peak's mass; dropping them shifts normalized masses by
// less than 1e-12 even on the largest grids seen here.
constexpr double kMassCutoff = 40.0;
constexpr int kCoarseFactor = 3;

// Zones below this mass are reporting noise, not signal; dropping them
// keeps the mass list canonical regardless of evaluation order.
constexpr double kMassFloor = 1e-12;

void check_observations(const std::vector<loc::RefObservation>& obs) {
    require(!obs.empty(), "zone verification needs at least one observation");
    for (const auto& o : obs) {
        require(geo::is_valid(o.ref_loc), "invalid reference location");
        require(std::isfinite(o.sym_rtt_ms) && o.sym_rtt_ms > 0.0,
                "symmetric rtt must be positive");
    }
}

void check_options(const Options& opt) {
    require(std::isfinite(opt.resolution_deg) && opt.resolution_deg > 0.0,
            "grid resolution must be positive");
    require(opt.min_shrink >= 0.0 && opt.min_shrink < 1.0,
            "min_shrink must lie in [0, 1)");
    require(opt.lat_clamp_deg > 0.0 && opt.lat_clamp_deg <= 90.0,
            "latitude clamp must lie in (0, 90]");
}

// Shared tail: attribute per-point mass to zones and pick the winner.
// Ascending map order makes ties resolve to the first zone id.
Decision aggregate(const geo::ZoneMap& map,
                   const std::vector<geo::GeoPoint>& pts,
                   const std::vector<double>& scores, std::string_view claimed,
                   Decision d) {
    std::map<std::string, double, std::less<>> mass;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (const geo::Zone* z = map.zone_of(pts[i])) {
            mass[z->id] += scores[i];
        } else {
            d.unzoned_mass += scores[i];
        }
    }
    d.masses.reserve(mass.size());
    for (const auto& [id, m] : mass) {
        if (m > d.winner_mass) {
            d.winner_mass = m;
            d.winner = id;
        }
        if (id == claimed) d.claimed_mass = m;
        if (m >= kMassFloor) d.masses.push_back({id, m});
    }
    d.verified = !d.winner.empty() && d.winner == claimed;
    return d;
}

std::vector<double> normalized_scores(std::vector<double> rmse) {
    const double best = *std::min_element(rmse.begin(), rmse.end());
    double z = 0.0;
    for (double& r : rmse) {
        r = std::exp(-(r - best));
        z += r;
    }
    for (double& r : rmse) r /= z;
    return rmse;
}

} // namespace

double max_distance_km(double rtt_ms) {
    require(std::isfinite(rtt_ms) && rtt_ms > 0.0, "rtt must be positive");
    return prop::kMaxPlausibleSpeedKmPerMs * rtt_ms;
}

TargetArea target_area(const std::vector<loc::RefObservation>& observations,
                       const Options& options) {
    check_observations(observations);
    check_options(options);

    std::vector<double> radius(observations.size());
    for (std::size_t j = 0; j < observations.size(); ++j)
        radius[j] = max_distance_km(observations[j].sym_rtt_ms);
    std::vector<std::size_t> order(observations.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return radius[a] != radius[b] ? radius[a] < radius[b] : a < b;
    });

    // Lattice over the tightest cap's bounding box, with one extra step of
    // margin so rim points are not lost to rounding.
    const geo::GeoPoint center = observations[order.front()].ref_loc;
    const double r0 = radius[order.front()];
    const double dlat = r0 / kKmPerDeg + options.resolution_deg;
    const double lat_lo = std::max(center.lat_deg - dlat, -options.lat_clamp_deg);
    const double lat_hi = std::min(center.lat_deg + dlat, options.lat_clamp_deg);
    const double cos_min = std::min(std::cos(lat_lo * kPi / 180.0),
                                    std::cos(lat_hi * kPi / 180.0));
    const double dlon = std::min(
        r0 / (kKmPerDeg * std::max(cos_min, 0.02)) + options.resolution_deg,
        180.0);

    TargetArea area;
    area.resolution_deg = options.resolution_deg;
    area.points = geo::make_grid(lat_lo, lat_hi, center.lon_deg - dlon,
                                 center.lon_deg + dlon, options.resolution_deg);

    // Caps compare squared chord lengths on the unit sphere:
    // arc <= r  <=>  chord <= 2 sin(r / 2R).
    std::vector<geo::Vec3> units;
    units.reserve(area.points.size());
    for (const auto& p : area.points) units.push_back(geo::to_unit(p));

    for (std::size_t idx : order) {
        const std::size_t before = area.points.size();
        if (before == 0) break;
        const geo::Vec3 c = geo::to_unit(observations[idx].ref_loc);
        const double half = std::min(radius[idx] / (2.0 * geo::kEarthRadiusKm),
                                     kPi / 2.0);
        const double chord = 2.0 * std::sin(half);
        const double chord2 = chord * chord;
        std::size_t w = 0;
        for (std::size_t r = 0; r < before; ++r) {
            const double dx = units[r].x - c.x;
            const double dy = units[r].y - c.y;
            const double dz = units[r].z - c.z;
            if (dx * dx + dy * dy + dz * dz <= chord2) {
                area.points[w] = area.points[r];
                units[w] = units[r];
                ++w;
            }
        }
        area.points.resize(w);
        units.resize(w);
        ++area.caps_applied;
        if (static_cast<double>(before - w) <
            options.min_shrink * static_cast<double>(before))
            break;
    }
    return area;
}

std::vector<double> score_area(const prop::Model& model,
                               const std::vector<loc::RefObservation>& observations,
                               const TargetArea& area) {
    if (area.points.empty()) return {};
    loc::Problem problem(model, observations);
    std::vector<double> rmse(area.points.size());
    for (std::size_t i = 0; i < area.points.size(); ++i)
        rmse[i] = problem.objective(area.points[i]);
    return normalized_scores(std::move(rmse));
}

Decision verify_zone_exact(const prop::Model& model, const geo::ZoneMap& map,
                           const std::vector<loc::RefObservation>& observations,
                           std::string_view claimed_zone,
                           const Options& options) {
    require(map.find(claimed_zone) != nullptr, "claimed zone not in the map");
    TargetArea area = target_area(observations, options);
    Decision d;
    d.area_points = area.points.size();
    if (area.points.empty()) return d;
    std::vector<double> scores = score_area(model, observations, area);
    return aggregate(map, area.points, scores, claimed_zone, std::move(d));
}

Decision verify_zone(const prop::Model& model, const geo::ZoneMap& map,
                     const std::vector<loc::RefObservation>& observations,
                     std::string_view claimed_zone,
                     const Options& options) {
    require(map.find(claimed_zone) != nullptr, "claimed zone not in the map");
    TargetArea area = target_area(observations, options);
    Decision d;
    d.area_points = area.points.size();
    if (area.points.empty()) return d;

    const std::vector<geo::GeoPoint>& pts = area.points;
    loc::Problem problem(model, observations);

    // Bucket lattice points into coarse cells and evaluate one member per
    // cell. The objective is Lipschitz with constant max(omega) (each arc
    // distance is 1-Lipschitz in the candidate, weights are fixed), so a
    // cell whose probe scores margin above the best probe cannot contain
    // any point within kMassCutoff of the true minimum.
    const double cell_deg = kCoarseFactor * area.resolution_deg;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells;
    cells.reserve(pts.size() / (kCoarseFactor * kCoarseFactor) + 1);
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
        const auto qi =
            static_cast<std::int64_t>(std::floor((pts[i].lat_deg + 90.0) / cell_deg));
        const auto qj =
            static_cast<std::int64_t>(std::floor((pts[i].lon_deg + 180.0) / cell_deg));
        const std::uint64_t key = (static_cast<std::uint64_t>(qi) << 32) ^
                                  static_cast<std::uint32_t>(static_cast<std::int32_t>(qj));
        cells[key].push_back(i);
    }

    double min_probe = std::numeric_limits<double>::infinity();
    std::vector<std::pair<const std::vector<std::uint32_t>*, double>> probes;
    probes.reserve(cells.size());
    for (const auto& [key, members] : cells) {
        (void)key;
        const double r = problem.objective(pts[members.front()]);
        probes.emplace_back(&members, r);
        min_probe = std::min(min_probe, r);
    }

    const double lipschitz =
        *std::max_element(model.omega.begin(), model.omega.end());
    const double cell_diag_km = 1.01 * std::sqrt(2.0) * kKmPerDeg * cell_deg;
    const double margin = kMassCutoff + 2.0 * lipschitz * cell_diag_km;

    std::vector<geo::GeoPoint> kept;
    std::vector<double> rmse;
    for (const auto& [members, probe] : probes) {
        if (probe > min_probe + margin) continue;
        for (std::uint32_t i : *members) {
            kept.push_back(pts[i]);
            rmse.push_back(problem.objective(pts[i]));
        }
    }
    std::vector<double> scores = normalized_scores(std::move(rmse));
    return aggregate(map, kept, scores, claimed_zone, std::move(d));
}

} // namespace verloc::zone
