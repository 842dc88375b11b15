#include "verloc/localize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "verloc/common.hpp"

namespace verloc::loc {

Problem::Problem(const prop::Model& model,
                 const std::vector<RefObservation>& observations) {
    require(observations.size() >= 3,
            "localize: need at least three references");
    ref_units_.reserve(observations.size());
    measured_km_.reserve(observations.size());
    weights_.reserve(observations.size());
    for (const auto& obs : observations) {
        require(obs.sym_rtt_ms > 0.0 && std::isfinite(obs.sym_rtt_ms),
                "localize: rtt must be positive and finite");
        require(geo::is_valid(obs.ref_loc),
                "localize: reference location invalid");
        const double measured = prop::time_to_distance(model, obs.sym_rtt_ms);
        ref_units_.push_back(geo::to_unit(obs.ref_loc));
        measured_km_.push_back(measured);
        weights_.push_back(prop::noise_weight(model, measured));
    }
}

double Problem::objective(const geo::GeoPoint& candidate) const {
    const geo::Vec3 u = geo::to_unit(candidate);
    double sum = 0.0;
    const std::size_t n = ref_units_.size();
    for (std::size_t j = 0; j < n; ++j) {
        const double r = weights_[j] * (geo::arc_km(u, ref_units_[j]) -
                                        measured_km_[j]);
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(n));
}

std::array<double, 2> Problem::gradient(const geo::GeoPoint& candidate,
                                        double h_km) const {
    require(h_km > 0.0, "localize: gradient step must be positive");
    const double fe = objective(geo::offset_km(candidate, h_km, 0.0));
    const double fw = objective(geo::offset_km(candidate, -h_km, 0.0));
    const double fn = objective(geo::offset_km(candidate, 0.0, h_km));
    const double fs = objective(geo::offset_km(candidate, 0.0, -h_km));
    return {(fe - fw) / (2.0 * h_km), (fn - fs) / (2.0 * h_km)};
}

geo::GeoPoint Problem::initial_guess() const {
    geo::Vec3 acc{0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < ref_units_.size(); ++j) {
        const double w = 1.0 / std::max(measured_km_[j], 1.0);
        acc.x += w * ref_units_[j].x;
        acc.y += w * ref_units_[j].y;
        acc.z += w * ref_units_[j].z;
    }
    return geo::from_unit(acc);
}

namespace {

struct StartResult {
    geo::GeoPoint point;
    double value;
    int iterations;
    bool converged;
};

StartResult descend(const Problem& problem, geo::GeoPoint x,
                    const Options& opt) {
    double fx = problem.objective(x);
    double step_km = 50.0; // line-search memory; adapts quickly either way
    int iter = 0;
    bool converged = false;
    for (; iter < opt.max_iterations; ++iter) {
        const auto g = problem.gradient(x, opt.gradient_step_km);
        const double gnorm = std::hypot(g[0], g[1]);
        if (gnorm < 1e-12) {
            converged = true;
            break;
        }
        const double de = -g[0] / gnorm;
        const double dn = -g[1] / gnorm;

        // Backtracking: shrink until the step actually improves.
        double alpha = step_km;
        geo::GeoPoint next = x;
        double fnext = fx;
        bool accepted = false;
        while (alpha >= 1e-4) {
            const geo::GeoPoint trial =
                geo::offset_km(x, de * alpha, dn * alpha);
            const double ftrial = problem.objective(trial);
            if (ftrial < fx - 1e-4 * alpha * gnorm) {
                next = trial;
                fnext = ftrial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            converged = true; // no descent direction at line-search scale
            break;
        }
        const double improvement = fx - fnext;
        x = next;
        fx = fnext;
        step_km = std::min(alpha * 1.5, 500.0);
        if (alpha < opt.step_converged_km ||
            improvement < opt.improvement_converged) {
            converged = true;
            ++iter;
            break;
        }
    }
    return {x, fx, iter, converged};
}

} // namespace

Result estimate_location(const prop::Model& model,
                         const std::vector<RefObservation>& observations,
                         const Options& options) {
    require(options.max_iterations >= 1 && options.restarts >= 0,
            "localize: bad options");
    const Problem problem(model, observations);
    const geo::GeoPoint guess = problem.initial_guess();

    std::vector<geo::GeoPoint> starts{guess};
    // Deterministic corner restarts around the guess.
    const double j = options.restart_jitter_deg;
    const std::array<std::array<double, 2>, 4> corners{
        {{+j, +j}, {+j, -j}, {-j, +j}, {-j, -j}}};
    for (int k = 0; k < options.restarts && k < 4; ++k) {
        const double lat = std::clamp(guess.lat_deg + corners[static_cast<std::size_t>(k)][0],
                                      -90.0, 90.0);
        starts.push_back(geo::make_point(lat, guess.lon_deg +
                                                  corners[static_cast<std::size_t>(k)][1]));
    }

    Result best;
    best.residual_km = std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
        const StartResult r = descend(problem, s, options);
        best.iterations += r.iterations;
        if (r.value < best.residual_km) {
            best.residual_km = r.value;
            best.estimate = r.point;
            best.converged = r.converged;
        }
    }
    return best;
}

} // namespace verloc::loc
