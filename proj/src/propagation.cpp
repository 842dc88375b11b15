#include "verloc/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace verloc::prop {

namespace {

double curve(double v_max, double d_half, double d) {
    return v_max * d / (d + d_half);
}

} // namespace

double Model::bin_center(std::size_t i) const {
    require(i + 1 < bin_edges.size(), "model: bin index out of range");
    return std::sqrt(bin_edges[i] * bin_edges[i + 1]);
}

std::size_t Model::bin_of(double distance_km) const {
    require(distance_km >= 0.0 && std::isfinite(distance_km),
            "model: distance must be finite and non-negative");
    const auto it =
        std::upper_bound(bin_edges.begin(), bin_edges.end(), distance_km);
    if (it == bin_edges.begin()) return 0;
    const std::size_t idx = static_cast<std::size_t>(it - bin_edges.begin()) - 1;
    return std::min(idx, bins() - 1);
}

void Model::validate() const {
    require(v_max > 0.0 && std::isfinite(v_max), "model: v_max must be positive");
    require(d_half > 0.0 && std::isfinite(d_half),
            "model: d_half must be positive");
    require(envelope_tolerance >= 0.0 && envelope_tolerance <= 0.5,
            "model: envelope tolerance out of [0, 0.5]");
    const std::size_t b = bins();
    require(b >= 1, "model: needs at least one bin");
    require(bin_edges.size() == b + 1, "model: edge count must be bins+1");
    require(lower_speed.size() == b && noise.size() == b,
            "model: per-bin arrays must agree in size");
    for (std::size_t i = 0; i + 1 < bin_edges.size(); ++i)
        require(bin_edges[i] > 0.0 && bin_edges[i] < bin_edges[i + 1],
                "model: bin edges must be positive and ascending");
    double omega_sum = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        require(omega[i] > 0.0, "model: omega must be positive");
        if (i > 0)
            require(omega[i] >= omega[i - 1] - 1e-12,
                    "model: omega must be non-decreasing with distance");
        omega_sum += omega[i];
        require(lower_speed[i] > 0.0, "model: lower speeds must be positive");
        require(lower_speed[i] <= speed_at(*this, bin_center(i)) + 1e-12,
                "model: lower speed exceeds the model speed at the bin center");
        const NoiseBin& nb = noise[i];
        require(nb.slow_prob >= 0.0 && nb.slow_prob <= 1.0,
                "model: slow_prob out of [0, 1]");
        require(nb.tight_log_sigma > 0.0 && nb.slow_log_sigma > 0.0,
                "model: noise sigmas must be positive");
        require(nb.probe_scale >= 0.0, "model: probe scale must be non-negative");
    }
    require(std::abs(omega_sum / static_cast<double>(b) - 1.0) < 1e-6,
            "model: omega must average to 1");
}

double speed_at(const Model& m, double distance_km) {
    require(distance_km >= 0.0 && std::isfinite(distance_km),
            "speed_at: distance must be finite and non-negative");
    const double d = std::max(distance_km, kMinFitDistanceKm);
    return std::min(curve(m.v_max, m.d_half, d), kMaxPlausibleSpeedKmPerMs);
}

double floor_rtt_ms(const Model& m, double distance_km) {
    return distance_km / speed_at(m, distance_km);
}

double time_to_distance(const Model& m, double rtt_ms) {
    require(rtt_ms >= 0.0 && std::isfinite(rtt_ms),
            "time_to_distance: rtt must be finite and non-negative");
    const double s1 = speed_at(m, kMinFitDistanceKm);
    const double t1 = kMinFitDistanceKm / s1;
    if (rtt_ms <= t1) return rtt_ms * s1;
    if (m.v_max <= kMaxPlausibleSpeedKmPerMs)
        return m.v_max * rtt_ms - m.d_half;
    // Curve hits the plausibility cap at d_cap; beyond it the floor is
    // linear at the cap speed.
    const double cap = kMaxPlausibleSpeedKmPerMs;
    const double d_cap = cap * m.d_half / (m.v_max - cap);
    if (d_cap <= kMinFitDistanceKm) return rtt_ms * cap;
    const double t_cap = d_cap / cap;
    if (rtt_ms <= t_cap) return m.v_max * rtt_ms - m.d_half;
    return rtt_ms * cap;
}

namespace {

double interp_log(const Model& m, const std::vector<double>& values, double d) {
    const std::size_t b = m.bins();
    if (b == 1) return values[0];
    const double x = std::log(std::max(d, 1e-9));
    const double first = std::log(m.bin_center(0));
    if (x <= first) return values[0];
    const double last = std::log(m.bin_center(b - 1));
    if (x >= last) return values[b - 1];
    for (std::size_t i = 0; i + 1 < b; ++i) {
        const double x0 = std::log(m.bin_center(i));
        const double x1 = std::log(m.bin_center(i + 1));
        if (x <= x1) {
            const double w = (x - x0) / (x1 - x0);
            return values[i] * (1.0 - w) + values[i + 1] * w;
        }
    }
    return values[b - 1];
}

} // namespace

double noise_weight(const Model& m, double distance_km) {
    require(distance_km >= 0.0 && std::isfinite(distance_km),
            "noise_weight: distance must be finite and non-negative");
    return interp_log(m, m.omega, distance_km);
}

double lower_speed_bound(const Model& m, double distance_km, double tau) {
    require(tau >= 0.0 && tau < 1.0, "lower_speed_bound: tau out of [0, 1)");
    // Interpolate the relative margin below the speed curve rather than the
    // absolute speeds: the curve is convex in log-distance at short range,
    // so a chord through the stored speeds could poke above it.
    std::vector<double> margins(m.bins());
    for (std::size_t i = 0; i < m.bins(); ++i)
        margins[i] = 1.0 - m.lower_speed[i] / speed_at(m, m.bin_center(i));
    const double margin = interp_log(m, margins, distance_km);
    return speed_at(m, distance_km) * (1.0 - margin) * (1.0 - tau);
}

double upper_speed_bound(const Model& m, double distance_km) {
    return std::min(kMaxPlausibleSpeedKmPerMs,
                    speed_at(m, distance_km) * (1.0 + m.envelope_tolerance));
}

namespace {

double draw_path_factor(const NoiseBin& nb, Rng& rng) {
    const bool slow = u01(rng) < nb.slow_prob;
    const double overhead =
        slow ? lognormal(rng, nb.slow_log_median, nb.slow_log_sigma)
             : lognormal(rng, nb.tight_log_median, nb.tight_log_sigma);
    return 1.0 + overhead;
}

} // namespace

double sample_rtt(const Model& m, double distance_km, Rng& rng) {
    return sample_min_rtt(m, distance_km, 1, rng);
}

double sample_min_rtt(const Model& m, double distance_km, int probes,
                      Rng& rng) {
    require(probes >= 1, "sample_min_rtt: probe count must be positive");
    require(distance_km > 0.0 && std::isfinite(distance_km),
            "sample_min_rtt: distance must be positive");
    const NoiseBin& nb = m.noise[m.bin_of(distance_km)];
    const double path = draw_path_factor(nb, rng);
    double best_probe = std::numeric_limits<double>::infinity();
    for (int p = 0; p < probes; ++p) {
        const double jitter =
            nb.probe_scale > 0.0 ? exponential(rng, nb.probe_scale) : 0.0;
        best_probe = std::min(best_probe, 1.0 + jitter);
    }
    return floor_rtt_ms(m, distance_km) * path * best_probe;
}

bool superluminal(const CalibrationSample& s) {
    require(s.rtt_ms > 0.0 && s.distance_km >= 0.0,
            "calibration sample: rtt must be positive, distance non-negative");
    return s.distance_km / s.rtt_ms > kSpeedOfLightKmPerMs;
}

std::vector<CalibrationSample>
filter_superluminal(const std::vector<CalibrationSample>& samples) {
    std::vector<CalibrationSample> kept;
    kept.reserve(samples.size());
    for (const auto& s : samples)
        if (!superluminal(s)) kept.push_back(s);
    return kept;
}

namespace {

// Least squares on the linearized curve: 1/v = 1/v_max + (d_half/v_max)/d.
void fit_curve(const std::vector<CalibrationSample>& samples, double& v_max,
               double& d_half) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (const auto& s : samples) {
        if (s.distance_km < kMinFitDistanceKm) continue;
        const double x = 1.0 / s.distance_km;
        const double y = s.rtt_ms / s.distance_km; // = 1/v
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    require(n >= 2, "build_model: need at least two usable samples");
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    require(std::abs(denom) > 1e-30,
            "build_model: degenerate distances, cannot fit the speed curve");
    const double slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / static_cast<double>(n);
    require(intercept > 0.0, "build_model: fit implies a non-positive v_max");
    v_max = std::min(1.0 / intercept, kMaxPlausibleSpeedKmPerMs);
    d_half = std::max(slope * v_max, 1e-3);
}

double nearest_rank_quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const std::size_t rank = static_cast<std::size_t>(
        std::max(1.0, std::ceil(q * static_cast<double>(n))));
    return values[rank - 1];
}

} // namespace

Model build_model(const std::vector<CalibrationSample>& samples,
                  const BuildOptions& options) {
    require(options.bins >= 1, "build_model: need at least one bin");
    require(options.min_distance_km > 0.0 &&
                options.max_distance_km > options.min_distance_km,
            "build_model: bad distance range");
    const auto kept = filter_superluminal(samples);
    Model m;
    m.envelope_tolerance = options.envelope_tolerance;
    fit_curve(kept, m.v_max, m.d_half);

    const double log_lo = std::log10(options.min_distance_km);
    const double log_hi = std::log10(options.max_distance_km);
    for (std::size_t i = 0; i <= options.bins; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(options.bins);
        m.bin_edges.push_back(std::pow(10.0, log_lo + t * (log_hi - log_lo)));
    }

    struct BinSample {
        double distance_km, speed;
    };
    std::vector<std::vector<BinSample>> binned(options.bins);
    for (const auto& s : kept) {
        if (s.distance_km < options.min_distance_km ||
            s.distance_km > options.max_distance_km)
            continue;
        std::size_t idx =
            std::upper_bound(m.bin_edges.begin(), m.bin_edges.end(),
                             s.distance_km) -
            m.bin_edges.begin();
        idx = std::min(idx == 0 ? 0 : idx - 1, options.bins - 1);
        binned[idx].push_back({s.distance_km, s.distance_km / s.rtt_ms});
    }

    m.omega.assign(options.bins, 0.0);
    m.lower_speed.assign(options.bins, 0.0);
    m.noise.assign(options.bins, NoiseBin{});

    std::vector<bool> filled(options.bins, false);
    for (std::size_t i = 0; i < options.bins; ++i) {
        const auto& v = binned[i];
        if (v.size() < 2) continue;
        filled[i] = true;
        double mean = 0.0;
        for (const auto& s : v) mean += s.speed;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (const auto& s : v) var += (s.speed - mean) * (s.speed - mean);
        var /= static_cast<double>(v.size() - 1);
        m.omega[i] = 1.0 / std::max(std::sqrt(var), 1e-9);
        std::vector<double> speeds_only;
        speeds_only.reserve(v.size());
        for (const auto& s : v) speeds_only.push_back(s.speed);
        m.lower_speed[i] =
            std::min(nearest_rank_quantile(speeds_only, 0.05),
                     speed_at(m, m.bin_center(i)));

        // Path overheads relative to the fitted floor; split tight/detour.
        std::vector<double> tight, slow;
        for (const auto& s : v) {
            const double overhead =
                std::max(speed_at(m, s.distance_km) / s.speed - 1.0, 1e-6);
            (overhead < 0.04 ? tight : slow).push_back(overhead);
        }
        NoiseBin nb;
        nb.probe_scale = options.probe_scale;
        nb.slow_prob =
            static_cast<double>(slow.size()) / static_cast<double>(v.size());
        auto log_moments = [](const std::vector<double>& xs, double& mu,
                              double& sigma) {
            if (xs.empty()) return;
            double s = 0.0;
            for (double x : xs) s += std::log(x);
            mu = s / static_cast<double>(xs.size());
            double v2 = 0.0;
            for (double x : xs) v2 += (std::log(x) - mu) * (std::log(x) - mu);
            sigma = xs.size() > 1
                        ? std::sqrt(v2 / static_cast<double>(xs.size() - 1))
                        : 0.5;
            sigma = std::max(sigma, 1e-3);
        };
        nb.tight_log_median = std::log(0.003);
        nb.tight_log_sigma = 0.8;
        nb.slow_log_median = std::log(0.15);
        nb.slow_log_sigma = 0.9;
        log_moments(tight, nb.tight_log_median, nb.tight_log_sigma);
        log_moments(slow, nb.slow_log_median, nb.slow_log_sigma);
        m.noise[i] = nb;
    }

    // Empty bins inherit the nearest calibrated bin.
    require(std::any_of(filled.begin(), filled.end(), [](bool b) { return b; }),
            "build_model: no bin has enough samples");
    for (std::size_t i = 0; i < options.bins; ++i) {
        if (filled[i]) continue;
        std::size_t best = options.bins;
        std::size_t best_dist = options.bins + 1;
        for (std::size_t j = 0; j < options.bins; ++j) {
            if (!filled[j]) continue;
            const std::size_t dist = i > j ? i - j : j - i;
            if (dist < best_dist) {
                best_dist = dist;
                best = j;
            }
        }
        m.omega[i] = m.omega[best];
        m.lower_speed[i] =
            std::min(m.lower_speed[best], speed_at(m, m.bin_center(i)));
        m.noise[i] = m.noise[best];
    }

    // Longer paths get at least the trust of shorter ones, and the weights
    // average to one.
    for (std::size_t i = 1; i < options.bins; ++i)
        m.omega[i] = std::max(m.omega[i], m.omega[i - 1]);
    const double mean_omega =
        std::accumulate(m.omega.begin(), m.omega.end(), 0.0) /
        static_cast<double>(options.bins);
    for (double& w : m.omega) w /= mean_omega;

    m.validate();
    return m;
}

namespace {

nlohmann::json model_to_json_doc(const Model& m) {
    nlohmann::json bins;
    bins["edges_km"] = m.bin_edges;
    bins["omega"] = m.omega;
    bins["lower_speed_km_per_ms"] = m.lower_speed;
    nlohmann::json noise = nlohmann::json::array();
    for (const auto& nb : m.noise) {
        noise.push_back({{"slow_prob", nb.slow_prob},
                         {"tight_log_median", nb.tight_log_median},
                         {"tight_log_sigma", nb.tight_log_sigma},
                         {"slow_log_median", nb.slow_log_median},
                         {"slow_log_sigma", nb.slow_log_sigma},
                         {"probe_scale", nb.probe_scale}});
    }
    bins["noise"] = noise;
    return nlohmann::json{
        {"format", "verloc-propagation-model"},
        {"version", m.version},
        {"speed_of_light_km_per_ms", kSpeedOfLightKmPerMs},
        {"fit",
         {{"family", "saturating"},
          {"v_max_km_per_ms", m.v_max},
          {"d_half_km", m.d_half}}},
        {"envelope_tolerance", m.envelope_tolerance},
        {"bins", bins}};
}

} // namespace

std::string to_json(const Model& m) { return model_to_json_doc(m).dump(2); }

Model from_json_text(const std::string& text) {
    const nlohmann::json doc = nlohmann::json::parse(text);
    require(doc.value("format", "") == "verloc-propagation-model",
            "model: unrecognized format tag");
    Model m;
    m.version = doc.at("version").get<int>();
    require(m.version == 1, "model: unsupported version");
    const auto& fit = doc.at("fit");
    require(fit.value("family", "") == "saturating",
            "model: unsupported fit family");
    m.v_max = fit.at("v_max_km_per_ms").get<double>();
    m.d_half = fit.at("d_half_km").get<double>();
    m.envelope_tolerance = doc.at("envelope_tolerance").get<double>();
    const auto& bins = doc.at("bins");
    m.bin_edges = bins.at("edges_km").get<std::vector<double>>();
    m.omega = bins.at("omega").get<std::vector<double>>();
    m.lower_speed = bins.at("lower_speed_km_per_ms").get<std::vector<double>>();
    for (const auto& jn : bins.at("noise")) {
        NoiseBin nb;
        nb.slow_prob = jn.at("slow_prob").get<double>();
        nb.tight_log_median = jn.at("tight_log_median").get<double>();
        nb.tight_log_sigma = jn.at("tight_log_sigma").get<double>();
        nb.slow_log_median = jn.at("slow_log_median").get<double>();
        nb.slow_log_sigma = jn.at("slow_log_sigma").get<double>();
        nb.probe_scale = jn.at("probe_scale").get<double>();
        m.noise.push_back(nb);
    }
    m.validate();
    return m;
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("model not readable: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

void save_model(const Model& m, const std::filesystem::path& path) {
    m.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("model not writable: " + path.string());
    out << to_json(m) << "\n";
}

Model default_model() {
    return load_model(find_data_file("propagation_default.json"));
}

} // namespace verloc::prop
