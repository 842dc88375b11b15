#include "verloc/netgen.hpp"

#include <algorithm>
#include <cmath>

namespace verloc::net {

geo::GeoPoint sample_location(const geo::ZoneMap& map, Rng& rng) {
    const geo::Bounds b = map.bounds();
    const double z_lo = std::sin(b.min_lat * geo::kDegToRad);
    const double z_hi = std::sin(b.max_lat * geo::kDegToRad);
    // Uniform in sin(lat) x lon is uniform by spherical area.
    for (int attempt = 0; attempt < 1000000; ++attempt) {
        const double z = uniform_real(rng, z_lo, z_hi);
        const double lat = std::asin(z) * geo::kRadToDeg;
        const double lon = uniform_real(rng, b.min_lon, b.max_lon);
        const geo::GeoPoint p{lat, lon};
        if (map.zone_of(p) != nullptr) return p;
    }
    throw std::runtime_error(
        "sample_location: rejection sampling failed; zone map degenerate?");
}

Network generate_network(const geo::ZoneMap& map, std::size_t n, Seed seed) {
    require(n >= 2, "generate_network: need at least two nodes");
    Rng key_rng = make_rng(derive_seed(seed, "keys"));
    std::vector<sched::Bytes> pks;
    pks.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        sched::Bytes pk(32);
        for (auto& byte : pk)
            byte = static_cast<std::uint8_t>(uniform_index(key_rng, 256));
        pks.push_back(std::move(pk));
    }
    std::sort(pks.begin(), pks.end());
    require(std::adjacent_find(pks.begin(), pks.end()) == pks.end(),
            "generate_network: key collision");

    Network net;
    net.nodes.resize(n);
    Rng loc_rng = make_rng(derive_seed(seed, "locations"));
    for (std::size_t i = 0; i < n; ++i) {
        NodeDescriptor& node = net.nodes[i];
        node.index = static_cast<std::uint32_t>(i);
        node.pk = pks[i];
        // Distinct positions: zero distance would make an RTT meaningless.
        for (;;) {
            const geo::GeoPoint p = sample_location(map, loc_rng);
            bool clash = false;
            for (std::size_t j = 0; j < i && !clash; ++j)
                clash = geo::great_circle_km(net.nodes[j].true_loc, p) < 1e-3;
            if (!clash) {
                node.true_loc = p;
                break;
            }
        }
        node.true_zone = map.zone_of(node.true_loc)->id;
        node.claimed_loc = node.true_loc;
        node.claimed_zone = node.true_zone;
    }
    return net;
}

PairSampler::PairSampler(const Network& network, const prop::Model& model,
                         Seed seed, int probes)
    : network_(&network), model_(&model), seed_(seed), probes_(probes) {
    require(probes >= 1, "PairSampler: probe count must be positive");
}

double PairSampler::true_distance_km(std::uint32_t i, std::uint32_t j) const {
    require(i < network_->size() && j < network_->size(),
            "PairSampler: node index out of range");
    return geo::great_circle_km(network_->nodes[i].true_loc,
                                network_->nodes[j].true_loc);
}

double PairSampler::measure(std::uint32_t from, std::uint32_t to) const {
    require(from != to, "PairSampler: a node does not measure itself");
    const double d = true_distance_km(from, to);
    Rng rng = make_rng(derive_seed(seed_, "pair-rtt", from, to));
    return prop::sample_min_rtt(*model_, d, probes_, rng);
}

const PairMeasurement* MeasurementSet::find(std::uint32_t i,
                                            std::uint32_t j) const {
    const std::uint32_t a = std::min(i, j), b = std::max(i, j);
    auto it = std::lower_bound(pairs.begin(), pairs.end(), std::pair{a, b},
                               [](const PairMeasurement& pm, std::pair<std::uint32_t, std::uint32_t> key) {
                                   return std::pair{pm.a, pm.b} < key;
                               });
    if (it == pairs.end() || it->a != a || it->b != b) return nullptr;
    return &*it;
}

PairMeasurement* MeasurementSet::find(std::uint32_t i, std::uint32_t j) {
    return const_cast<PairMeasurement*>(
        static_cast<const MeasurementSet*>(this)->find(i, j));
}

double MeasurementSet::directed(std::uint32_t from, std::uint32_t to) const {
    const PairMeasurement* pm = find(from, to);
    require(pm != nullptr, "measurements: pair not scheduled");
    return from == pm->a ? pm->rtt_ab : pm->rtt_ba;
}

double MeasurementSet::symmetric(std::uint32_t i, std::uint32_t j) const {
    const PairMeasurement* pm = find(i, j);
    require(pm != nullptr, "measurements: pair not scheduled");
    return symmetric_rtt(pm->rtt_ab, pm->rtt_ba);
}

MeasurementSet build_measurements(const Network& network,
                                  const sched::Schedule& schedule,
                                  const PairSampler& sampler) {
    require(network.size() == schedule.n,
            "build_measurements: network and schedule sizes differ");
    MeasurementSet ms;
    for (std::uint32_t i = 0; i < schedule.n; ++i) {
        for (std::uint32_t j : schedule.refs[i]) {
            if (j < i) continue; // each unordered pair once
            PairMeasurement pm;
            pm.a = i;
            pm.b = j;
            pm.rtt_ab = sampler.measure(i, j);
            pm.rtt_ba = sampler.measure(j, i);
            ms.pairs.push_back(pm);
        }
    }
    std::sort(ms.pairs.begin(), ms.pairs.end(),
              [](const PairMeasurement& x, const PairMeasurement& y) {
                  return std::pair{x.a, x.b} < std::pair{y.a, y.b};
              });
    ms.by_node.resize(network.size());
    for (std::size_t k = 0; k < ms.pairs.size(); ++k) {
        ms.by_node[ms.pairs[k].a].push_back(k);
        ms.by_node[ms.pairs[k].b].push_back(k);
    }
    return ms;
}

std::vector<wire::MeasurementRecord>
node_records(const MeasurementSet& ms, const sched::Schedule& schedule,
             std::uint32_t i) {
    require(i < schedule.n, "node_records: node index out of range");
    std::vector<wire::MeasurementRecord> records;
    records.reserve(schedule.refs[i].size());
    for (std::uint32_t j : schedule.refs[i]) {
        records.push_back(
            {j, wire::rtt_us_from_ms(ms.directed(i, j))});
    }
    return records;
}

} // namespace verloc::net
