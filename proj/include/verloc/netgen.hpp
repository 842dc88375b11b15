#pragma once

// Synthetic network instances and their measurement campaigns.
//
// A network is a list of node descriptors: key, true location (uniform
// over the zone map by area), the zone of that location, and a claimed
// location, which equals the true one until an attack rewrites it.
// Indices follow the ascending key order, matching the schedule's view.
//
// Measurements are directed: "from measures to" means `from` sends the
// probe burst and keeps the minimum RTT. The sampler derives one RNG
// stream per direction from (seed, from, to), so a pair's path overhead
// is sticky per direction and every value is reproducible in isolation:
// re-measuring (i, j) never disturbs any other pair.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "verloc/common.hpp"
#include "verloc/geo.hpp"
#include "verloc/propagation.hpp"
#include "verloc/schedule.hpp"
#include "verloc/wire.hpp"

namespace verloc::net {

struct NodeDescriptor {
    std::uint32_t index = 0;
    sched::Bytes pk;
    geo::GeoPoint true_loc;
    std::string true_zone;
    geo::GeoPoint claimed_loc;
    std::string claimed_zone;
    bool adversarial = false;
    bool claiming = false;
};

struct Network {
    std::vector<NodeDescriptor> nodes;
    std::size_t size() const { return nodes.size(); }
};

// n nodes with fresh keys, placed area-uniformly over the zone union.
// Locations are pairwise distinct.
Network generate_network(const geo::ZoneMap& map, std::size_t n, Seed seed);

// One area-uniform location draw over the zone union (exposed for attack
// placement, which needs draws excluding a specific zone).
geo::GeoPoint sample_location(const geo::ZoneMap& map, Rng& rng);

class PairSampler {
  public:
    PairSampler(const Network& network, const prop::Model& model, Seed seed,
                int probes = 200);

    // Directed burst minimum, ms. Deterministic in (seed, from, to).
    double measure(std::uint32_t from, std::uint32_t to) const;
    double true_distance_km(std::uint32_t i, std::uint32_t j) const;
    int probes() const { return probes_; }
    const prop::Model& model() const { return *model_; }

  private:
    const Network* network_;
    const prop::Model* model_;
    Seed seed_;
    int probes_;
};

inline double symmetric_rtt(double fwd_ms, double rev_ms) {
    return 0.5 * (fwd_ms + rev_ms);
}

// How a directed value came to be; the simulator labels what it changes so
// experiments can audit attack bookkeeping.
enum class Provenance : std::uint8_t {
    Benign,  // straight from the sampler
    Spoofed, // fabricated outright by the measuring side
    Delayed, // honest probe, adversarially delayed echo
};

struct PairMeasurement {
    std::uint32_t a = 0, b = 0; // a < b
    double rtt_ab = 0.0;        // measured by a toward b
    double rtt_ba = 0.0;        // measured by b toward a
    Provenance prov_ab = Provenance::Benign;
    Provenance prov_ba = Provenance::Benign;
};

struct MeasurementSet {
    std::vector<PairMeasurement> pairs; // sorted by (a, b)
    std::vector<std::vector<std::size_t>> by_node; // pair indices per node

    const PairMeasurement* find(std::uint32_t i, std::uint32_t j) const;
    PairMeasurement* find(std::uint32_t i, std::uint32_t j);
    double directed(std::uint32_t from, std::uint32_t to) const;
    double symmetric(std::uint32_t i, std::uint32_t j) const;
};

// Runs the full campaign for a schedule: both directions of every
// scheduled pair.
MeasurementSet build_measurements(const Network& network,
                                  const sched::Schedule& schedule,
                                  const PairSampler& sampler);

// Node i's reported records (its outbound direction per reference).
std::vector<wire::MeasurementRecord>
node_records(const MeasurementSet& ms, const sched::Schedule& schedule,
             std::uint32_t i);

} // namespace verloc::net
