#pragma once

// Trilateration from RTT-implied distances. Each reference contributes a
// residual between its measured distance (the optimistic floor-inverse of
// the symmetric RTT) and the great-circle distance to a candidate point,
// scaled by the model's per-distance noise weight. The estimate minimizes
// the weighted root-mean-square residual:
//
//   rmse(x) = sqrt( mean_j ( omega_j * (dist(x, ref_j) - measured_j) )^2 )
//
// Minimization is plain steepest descent in the local tangent plane with
// numerical (central-difference) gradients and a backtracking line search.
// The landscape is mildly multimodal under heavy noise, so a few
// deterministic restarts around the initial guess keep the solver out of
// shallow local dips. Weights are fixed per observation (evaluated at the
// measured distance), which keeps the objective smooth.

#include <array>
#include <vector>

#include "verloc/geo.hpp"
#include "verloc/propagation.hpp"

namespace verloc::loc {

struct RefObservation {
    geo::GeoPoint ref_loc;  // where the reference says it is
    double sym_rtt_ms = 0.0;
};

struct Options {
    int max_iterations = 500;          // per start
    double step_converged_km = 0.1;    // stop when a step moves less
    double improvement_converged = 1e-6;
    int restarts = 4;                  // extra starts at the four +-2 deg corners
    double restart_jitter_deg = 2.0;
    double gradient_step_km = 0.02;
};

struct Result {
    geo::GeoPoint estimate;
    double residual_km = 0.0; // weighted RMSE at the estimate
    int iterations = 0;       // summed over starts
    bool converged = false;   // at least one start met a tolerance
};

// Preprocessed instance: cached unit vectors, measured distances, weights.
class Problem {
  public:
    Problem(const prop::Model& model,
            const std::vector<RefObservation>& observations);

    double objective(const geo::GeoPoint& candidate) const;
    // d(objective)/d(east km), d(objective)/d(north km) by central
    // differences with step h_km.
    std::array<double, 2> gradient(const geo::GeoPoint& candidate,
                                   double h_km) const;
    // Chordal mean of reference positions, weighted by inverse measured
    // distance: close references anchor the start.
    geo::GeoPoint initial_guess() const;
    std::size_t size() const { return measured_km_.size(); }
    double measured_km(std::size_t j) const { return measured_km_[j]; }

  private:
    std::vector<geo::Vec3> ref_units_;
    std::vector<double> measured_km_;
    std::vector<double> weights_;
};

Result estimate_location(const prop::Model& model,
                         const std::vector<RefObservation>& observations,
                         const Options& options = {});

} // namespace verloc::loc
