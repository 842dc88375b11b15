#pragma once

// Empirical propagation model: the map between great-circle distance and
// Internet round-trip time, with its noise structure.
//
// The deterministic part is a saturating speed curve
//     v(d) = v_max * d / (d + d_half)
// clamped to two thirds of the speed of light (fiber propagation plus
// routing overhead never beats that in practice). Its inverse is rtt-floor:
// floor_rtt(d) = d / v(d), the fastest transmission the model allows.
//
// The stochastic part lives in log-spaced distance bins. An RTT draw is
//     floor_rtt(d) * path_factor * (1 + probe_jitter)
// where the path factor is sticky for a node pair and direction (routes
// rarely change during a measurement burst) and the probe jitter is fresh
// per probe. The path factor mixes a tight component (direct-ish routes,
// fractions of a percent above the floor) and a slow component (detours,
// tens of percent). Aggregating the minimum over many probes removes most
// probe jitter but cannot escape a slow path; that asymmetry is what both
// the localization weights and the speed bounds are calibrated against.
//
// Per-bin derived quantities:
//   omega       residual weight for trilateration, mean 1, non-decreasing
//               with distance (long paths have proportionally steadier
//               speeds, so their residuals are trusted more),
//   lower_speed the bound "honest traffic is rarely slower than this",
//               relaxed by the tolerance factor tau at check time.
// The upper speed bound is the model envelope itself: measured RTTs sit on
// or above the floor, so an implied speed above v(d) by more than a small
// envelope tolerance is physically implausible and flags manipulation.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "verloc/common.hpp"

namespace verloc::prop {

inline constexpr double kSpeedOfLightKmPerMs = 299.792458;
inline constexpr double kMaxPlausibleSpeedKmPerMs =
    2.0 * kSpeedOfLightKmPerMs / 3.0;
// Below this distance the speed curve is evaluated at its value here; RTT
// floors then fall linearly to zero instead of chasing the curve's vanishing
// intercept.
inline constexpr double kMinFitDistanceKm = 1.0;

struct NoiseBin {
    double slow_prob = 0.0;        // chance a path is a detour
    double tight_log_median = 0.0; // ln of median tight-path overhead
    double tight_log_sigma = 1.0;
    double slow_log_median = 0.0;  // ln of median detour overhead
    double slow_log_sigma = 1.0;
    double probe_scale = 0.0;      // exponential scale of per-probe jitter
};

struct Model {
    int version = 1;
    double v_max = 0.0;  // km/ms
    double d_half = 0.0; // km
    double envelope_tolerance = 0.0;
    std::vector<double> bin_edges; // ascending, size bins()+1
    std::vector<double> omega;
    std::vector<double> lower_speed; // km/ms
    std::vector<NoiseBin> noise;

    std::size_t bins() const { return omega.size(); }
    double bin_center(std::size_t i) const; // geometric mean of the edges
    std::size_t bin_of(double distance_km) const;

    void validate() const; // throws std::invalid_argument on any violation
};

// Model speed at a distance, km/ms. Positive, non-decreasing, capped at
// two thirds of c.
double speed_at(const Model& m, double distance_km);

// Fastest RTT the model allows for a distance. Strictly increasing in d.
double floor_rtt_ms(const Model& m, double distance_km);

// Inverse of floor_rtt_ms: the distance whose floor equals the given RTT.
// This is the standard optimistic reading of a measured RTT as a distance.
double time_to_distance(const Model& m, double rtt_ms);

// Piecewise-linear interpolation of omega / lower_speed over log-distance
// between bin centers, constant beyond the end bins.
double noise_weight(const Model& m, double distance_km);
double lower_speed_bound(const Model& m, double distance_km, double tau);
double upper_speed_bound(const Model& m, double distance_km);

// One full RTT draw (fresh path, one probe).
double sample_rtt(const Model& m, double distance_km, Rng& rng);

// Minimum over `probes` probes along one sticky path draw. This is the
// aggregate a measurement burst reports.
double sample_min_rtt(const Model& m, double distance_km, int probes, Rng& rng);

struct CalibrationSample {
    double distance_km = 0.0;
    double rtt_ms = 0.0;
};

// True when the sample implies propagation faster than light. Such samples
// are artifacts (clock skew, wrong ground truth) and must not enter a fit.
bool superluminal(const CalibrationSample& s);
std::vector<CalibrationSample>
filter_superluminal(const std::vector<CalibrationSample>& samples);

struct BuildOptions {
    std::size_t bins = 10;
    double min_distance_km = 10.0;
    double max_distance_km = 10000.0;
    double envelope_tolerance = 0.002;
    double probe_scale = 0.35; // not identifiable from min-aggregated data
};

// Fits a model to calibration samples: superluminal filter, least-squares
// fit of the speed curve, then per-bin weights, lower speeds (5th
// percentile, nearest rank), and path-noise moments.
Model build_model(const std::vector<CalibrationSample>& samples,
                  const BuildOptions& options = {});

std::string to_json(const Model& m);
Model from_json_text(const std::string& text);
Model load_model(const std::filesystem::path& path);
void save_model(const Model& m, const std::filesystem::path& path);

// The bundled, calibrated default (data/propagation_default.json).
Model default_model();

} // namespace verloc::prop
