#include "verloc/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace verloc::adv {

namespace {

// Shuffled node order shared by mark_adversaries and assign_false_claims;
// prefix-stable by construction.
std::vector<std::uint32_t> adversary_order(std::size_t n, Seed seed) {
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng = make_rng(derive_seed(seed, "adversary-order"));
    for (std::size_t i = n; i > 1; --i) {
        const std::uint64_t j = uniform_index(rng, i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

} // namespace

AttackCase classify(const net::NodeDescriptor& x, const net::NodeDescriptor& y) {
    const bool x_claims = x.adversarial && x.claiming;
    const bool y_claims = y.adversarial && y.claiming;
    if (x.adversarial && y.adversarial)
        return (x_claims || y_claims) ? AttackCase::Perfect : AttackCase::Untouched;
    if (!x_claims && !y_claims) return AttackCase::Untouched;

    const double claimed = geo::great_circle_km(x.claimed_loc, y.claimed_loc);
    const double truth = geo::great_circle_km(x.true_loc, y.true_loc);
    return claimed > truth ? AttackCase::SlowDown : AttackCase::NoManipulation;
}

double spoofed_rtt(const prop::Model& m, double claimed_km, double jitter) {
    require(std::isfinite(claimed_km) && claimed_km >= 0.0,
            "claimed distance must be non-negative");
    require(std::isfinite(jitter) && jitter >= 0.0,
            "spoof jitter cannot make replies faster than the claim allows");
    return prop::floor_rtt_ms(m, claimed_km) * (1.0 + jitter);
}

void mark_adversaries(net::Network& network, std::size_t count, Seed seed) {
    require(count <= network.size(), "more adversaries than nodes");
    for (auto& node : network.nodes) node.adversarial = false;
    const auto order = adversary_order(network.size(), seed);
    for (std::size_t k = 0; k < count; ++k)
        network.nodes[order[k]].adversarial = true;
}

void assign_false_claims(net::Network& network, const geo::ZoneMap& map,
                         std::size_t count, Seed seed) {
    require(!map.zones().empty(), "empty zone map");
    const auto order = adversary_order(network.size(), seed);

    std::size_t assigned = 0;
    for (std::uint32_t idx : order) {
        if (assigned == count) break;
        net::NodeDescriptor& node = network.nodes[idx];
        if (!node.adversarial) continue;
        require(map.zones().size() > 1 || map.zones()[0].id != node.true_zone,
                "no foreign zone to claim");

        Rng rng = make_rng(derive_seed(seed, "claim", idx));
        const geo::Zone* target = nullptr;
        do {
            const std::size_t z = uniform_index(rng, map.zones().size());
            target = &map.zones()[z];
        } while (target->id == node.true_zone);

        geo::GeoPoint spot;
        do {
            spot = net::sample_location(map, rng);
        } while (map.zone_of(spot)->id != target->id);

        node.claimed_loc = spot;
        node.claimed_zone = target->id;
        node.claiming = true;
        ++assigned;
    }
    require(assigned == count, "fewer adversaries than requested claims");
}

void reset_claims(net::Network& network) {
    for (auto& node : network.nodes) {
        node.claimed_loc = node.true_loc;
        node.claimed_zone = node.true_zone;
        node.claiming = false;
    }
}

void apply_attack(const prop::Model& m, const net::Network& network,
                  net::MeasurementSet& measurements, Seed attack_seed,
                  const AttackOptions& options) {
    require(options.perfect_jitter >= 0.0 && options.report_jitter >= 0.0,
            "spoof jitters must be non-negative");
    require(options.delay_jitter >= 0.0 && options.delay_jitter < 1.0,
            "delay jitter must lie in [0, 1)");

    for (net::PairMeasurement& pm : measurements.pairs) {
        const net::NodeDescriptor& a = network.nodes[pm.a];
        const net::NodeDescriptor& b = network.nodes[pm.b];
        const AttackCase kind = classify(a, b);
        if (kind == AttackCase::Untouched) continue;

        Rng rng = make_rng(derive_seed(attack_seed, "pair", pm.a, pm.b));
        const double claimed = geo::great_circle_km(a.claimed_loc, b.claimed_loc);

        if (kind == AttackCase::Perfect) {
            pm.rtt_ab = spoofed_rtt(m, claimed,
                                    uniform_real(rng, 0.0, options.perfect_jitter));
            pm.rtt_ba = spoofed_rtt(m, claimed,
                                    uniform_real(rng, 0.0, options.perfect_jitter));
            pm.prov_ab = net::Provenance::Spoofed;
            pm.prov_ba = net::Provenance::Spoofed;
            continue;
        }

        // Exactly one end is a claiming adversary here.
        const bool a_claims = a.adversarial && a.claiming;
        double& own = a_claims ? pm.rtt_ab : pm.rtt_ba;
        double& honest = a_claims ? pm.rtt_ba : pm.rtt_ab;
        net::Provenance& own_prov = a_claims ? pm.prov_ab : pm.prov_ba;
        net::Provenance& honest_prov = a_claims ? pm.prov_ba : pm.prov_ab;

        own = spoofed_rtt(m, claimed, uniform_real(rng, 0.0, options.report_jitter));
        own_prov = net::Provenance::Spoofed;

        if (kind == AttackCase::SlowDown) {
            const double target = spoofed_rtt(
                m, claimed, uniform_real(rng, 0.0, options.report_jitter));
            const double achieved =
                target * (1.0 + uniform_real(rng, -options.delay_jitter,
                                             options.delay_jitter));
            if (achieved > honest) {
                honest = achieved;
                honest_prov = net::Provenance::Delayed;
            }
        }
    }
}

} // namespace verloc::adv
