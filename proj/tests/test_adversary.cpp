#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "verloc/adversary.hpp"
#include "verloc/common.hpp"
#include "verloc/confidence.hpp"
#include "verloc/geo.hpp"
#include "verloc/netgen.hpp"
#include "verloc/propagation.hpp"
#include "verloc/schedule.hpp"

using namespace verloc;

namespace {

net::NodeDescriptor make_node(double tlat, double tlon, bool adversarial,
                              bool claiming, double clat, double clon) {
    net::NodeDescriptor n;
    n.true_loc = geo::make_point(tlat, tlon);
    n.claimed_loc = claiming ? geo::make_point(clat, clon) : n.true_loc;
    n.adversarial = adversarial;
    n.claiming = claiming;
    return n;
}

struct Scenario {
    geo::ZoneMap map;
    prop::Model model;
    net::Network network;
    sched::Schedule schedule;
    net::MeasurementSet honest;

    Scenario(std::size_t n, std::size_t t, Seed seed)
        : map(geo::ZoneMap::load(find_data_file("zones_europe15.json"))),
          model(prop::default_model()),
          network(net::generate_network(map, n, derive_seed(seed, "net"))) {
        std::vector<sched::Bytes> pks;
        for (const auto& node : network.nodes) pks.push_back(node.pk);
        const sched::Bytes beacon = {0xb0, 0x0c};
        schedule = sched::build_schedule(beacon, pks, t);
        net::PairSampler sampler(network, model, derive_seed(seed, "mtx"));
        honest = net::build_measurements(network, schedule, sampler);
    }
};

// The confidence view of node i: claimed pair distance plus both RTTs.
std::vector<conf::PairTiming> timings_for(const net::Network& nw,
                                          const net::MeasurementSet& ms,
                                          std::uint32_t i) {
    std::vector<conf::PairTiming> out;
    for (std::size_t idx : ms.by_node[i]) {
        const net::PairMeasurement& pm = ms.pairs[idx];
        const std::uint32_t j = pm.a == i ? pm.b : pm.a;
        const double d = geo::great_circle_km(nw.nodes[i].claimed_loc,
                                              nw.nodes[j].claimed_loc);
        const double out_ms = pm.a == i ? pm.rtt_ab : pm.rtt_ba;
        const double in_ms = pm.a == i ? pm.rtt_ba : pm.rtt_ab;
        out.push_back({d, out_ms, in_ms});
    }
    return out;
}

} // namespace

TEST_SUITE("adversary") {

TEST_CASE("pair classification follows claim geometry") {
    const auto honest_paris = make_node(48.8566, 2.3522, false, false, 0, 0);
    const auto honest_warsaw = make_node(52.2297, 21.0122, false, false, 0, 0);
    // True Berlin claiming Madrid: farther from Paris than the truth.
    const auto claim_far = make_node(52.52, 13.405, true, true, 40.4168, -3.7038);
    // True Madrid claiming Berlin: nearer to Warsaw than the truth.
    const auto claim_near = make_node(40.4168, -3.7038, true, true, 52.52, 13.405);
    const auto colluder = make_node(50.08, 14.43, true, false, 0, 0);

    CHECK(adv::classify(honest_paris, honest_warsaw) == adv::AttackCase::Untouched);
    CHECK(adv::classify(colluder, honest_paris) == adv::AttackCase::Untouched);
    CHECK(adv::classify(claim_far, colluder) == adv::AttackCase::Perfect);
    CHECK(adv::classify(claim_far, claim_near) == adv::AttackCase::Perfect);
    CHECK(adv::classify(claim_far, honest_paris) == adv::AttackCase::SlowDown);
    CHECK(adv::classify(claim_near, honest_warsaw) == adv::AttackCase::NoManipulation);

    // Order of arguments never matters.
    CHECK(adv::classify(honest_paris, claim_far) == adv::AttackCase::SlowDown);
    CHECK(adv::classify(honest_warsaw, claim_near) == adv::AttackCase::NoManipulation);
    CHECK(adv::classify(colluder, claim_far) == adv::AttackCase::Perfect);
}

TEST_CASE("spoofed timings sit on or above the claimed floor") {
    const prop::Model m = prop::default_model();
    CHECK(adv::spoofed_rtt(m, 800.0, 0.0) ==
          doctest::Approx(prop::floor_rtt_ms(m, 800.0)).epsilon(1e-15));
    CHECK(adv::spoofed_rtt(m, 800.0, 0.02) ==
          doctest::Approx(prop::floor_rtt_ms(m, 800.0) * 1.02).epsilon(1e-15));
    CHECK_THROWS_AS(adv::spoofed_rtt(m, 800.0, -0.01), std::invalid_argument);
    CHECK_THROWS_AS(adv::spoofed_rtt(m, -1.0, 0.0), std::invalid_argument);

    // Fabricated values can never imply a speed above the claimed bound.
    for (double d : {5.0, 120.0, 800.0, 4000.0})
        for (double j : {0.0, 0.01, 0.03}) {
            const double rtt = adv::spoofed_rtt(m, d, j);
            CHECK(d / rtt <= prop::upper_speed_bound(m, d) * (1.0 + 1e-12));
        }
}

TEST_CASE("adversary marking is deterministic and prefix-stable") {
    const geo::ZoneMap map = geo::ZoneMap::load(find_data_file("zones_europe15.json"));
    net::Network nw = net::generate_network(map, 60, 7);

    adv::mark_adversaries(nw, 12, 99);
    std::vector<std::uint32_t> first;
    for (const auto& n : nw.nodes)
        if (n.adversarial) first.push_back(n.index);
    CHECK(first.size() == 12);

    adv::mark_adversaries(nw, 24, 99);
    std::size_t overlap = 0;
    for (const auto& n : nw.nodes)
        if (n.adversarial &&
            std::find(first.begin(), first.end(), n.index) != first.end())
            ++overlap;
    CHECK(overlap == 12); // smaller draw is a prefix of the larger

    CHECK_THROWS_AS(adv::mark_adversaries(nw, 61, 99), std::invalid_argument);
}

TEST_CASE("claims are foreign, nested, and reversible") {
    const geo::ZoneMap map = geo::ZoneMap::load(find_data_file("zones_europe15.json"));
    net::Network nw = net::generate_network(map, 60, 7);
    adv::mark_adversaries(nw, 20, 99);

    adv::assign_false_claims(nw, map, 8, 99);
    std::vector<std::pair<std::uint32_t, geo::GeoPoint>> claims8;
    for (const auto& n : nw.nodes) {
        if (!n.claiming) {
            CHECK(n.claimed_zone == n.true_zone);
            continue;
        }
        CHECK(n.adversarial);
        CHECK(n.claimed_zone != n.true_zone);
        CHECK(map.zone_of(n.claimed_loc)->id == n.claimed_zone);
        claims8.push_back({n.index, n.claimed_loc});
    }
    CHECK(claims8.size() == 8);

    // Growing the claiming set leaves earlier claims untouched.
    adv::reset_claims(nw);
    adv::assign_false_claims(nw, map, 20, 99);
    std::size_t matched = 0;
    for (const auto& [idx, loc] : claims8) {
        const auto& n = nw.nodes[idx];
        if (n.claiming && n.claimed_loc.lat_deg == loc.lat_deg &&
            n.claimed_loc.lon_deg == loc.lon_deg)
            ++matched;
    }
    CHECK(matched == 8);

    adv::reset_claims(nw);
    for (const auto& n : nw.nodes) {
        CHECK(!n.claiming);
        CHECK(n.claimed_zone == n.true_zone);
    }

    CHECK_THROWS_AS(adv::assign_false_claims(nw, map, 21, 99),
                    std::invalid_argument);
}

TEST_CASE("attack rewrites match the case table") {
    Scenario s(40, 6, 11);
    adv::mark_adversaries(s.network, 10, 5);
    adv::assign_false_claims(s.network, s.map, 6, 5);

    net::MeasurementSet attacked = s.honest;
    adv::apply_attack(s.model, s.network, attacked, 17);

    net::MeasurementSet again = s.honest;
    adv::apply_attack(s.model, s.network, again, 17);

    std::size_t perfect = 0, slow = 0, nomanip = 0;
    for (std::size_t k = 0; k < attacked.pairs.size(); ++k) {
        const auto& pm = attacked.pairs[k];
        const auto& orig = s.honest.pairs[k];
        const auto& na = s.network.nodes[pm.a];
        const auto& nb = s.network.nodes[pm.b];
        const double claimed = geo::great_circle_km(na.claimed_loc, nb.claimed_loc);
        const double floor = prop::floor_rtt_ms(s.model, claimed);

        // Determinism: the second run is bit-identical.
        CHECK(pm.rtt_ab == again.pairs[k].rtt_ab);
        CHECK(pm.rtt_ba == again.pairs[k].rtt_ba);

        switch (adv::classify(na, nb)) {
        case adv::AttackCase::Untouched:
            CHECK(pm.rtt_ab == orig.rtt_ab);
            CHECK(pm.rtt_ba == orig.rtt_ba);
            CHECK(pm.prov_ab == net::Provenance::Benign);
            CHECK(pm.prov_ba == net::Provenance::Benign);
            break;
        case adv::AttackCase::Perfect:
            ++perfect;
            CHECK(pm.prov_ab == net::Provenance::Spoofed);
            CHECK(pm.prov_ba == net::Provenance::Spoofed);
            CHECK(pm.rtt_ab >= floor);
            CHECK(pm.rtt_ba >= floor);
            break;
        case adv::AttackCase::SlowDown: {
            ++slow;
            const bool a_claims = na.adversarial && na.claiming;
            const double own = a_claims ? pm.rtt_ab : pm.rtt_ba;
            const double honest = a_claims ? pm.rtt_ba : pm.rtt_ab;
            const double honest_orig = a_claims ? orig.rtt_ba : orig.rtt_ab;
            CHECK((a_claims ? pm.prov_ab : pm.prov_ba) == net::Provenance::Spoofed);
            CHECK(own >= floor);
            CHECK(honest >= honest_orig); // delay only ever adds
            break;
        }
        case adv::AttackCase::NoManipulation: {
            ++nomanip;
            const bool a_claims = na.adversarial && na.claiming;
            const double honest = a_claims ? pm.rtt_ba : pm.rtt_ab;
            const double honest_orig = a_claims ? orig.rtt_ba : orig.rtt_ab;
            CHECK((a_claims ? pm.prov_ab : pm.prov_ba) == net::Provenance::Spoofed);
            CHECK((a_claims ? pm.prov_ba : pm.prov_ab) == net::Provenance::Benign);
            CHECK(honest == honest_orig);
            break;
        }
        }
    }
    MESSAGE("perfect " << perfect << ", slowdown " << slow
            << ", nomanip " << nomanip);
    CHECK(perfect > 0);
    CHECK(slow + nomanip > 0);
}

TEST_CASE("claiming nodes score below honest ones") {
    Scenario s(200, 50, 23);
    adv::mark_adversaries(s.network, 20, 31);
    adv::assign_false_claims(s.network, s.map, 20, 31);

    net::MeasurementSet attacked = s.honest;
    adv::apply_attack(s.model, s.network, attacked, 41);

    double max_claiming = 0.0;
    double min_honest = 1.0;
    std::size_t honest_accepted = 0, honest_total = 0;
    for (const auto& node : s.network.nodes) {
        const double score = conf::confidence_score(
            s.model, timings_for(s.network, attacked, node.index));
        if (node.claiming) {
            max_claiming = std::max(max_claiming, score);
        } else if (!node.adversarial) {
            ++honest_total;
            min_honest = std::min(min_honest, score);
            if (conf::accept(score)) ++honest_accepted;
        }
    }
    MESSAGE("max claiming " << max_claiming << ", min honest " << min_honest);
    CHECK(max_claiming < conf::kDefaultThreshold);
    CHECK(static_cast<double>(honest_accepted) >= 0.9 * honest_total);
}

} // TEST_SUITE
