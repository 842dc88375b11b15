// Command-line front end. Every subcommand is file-in/file-out so full
// pipelines can be scripted and replayed:
//
//   step-by-step   generate-network -> schedule -> simulate ->
//                  localize / verify-zone / confidence
//   experiments    attack, sweep, run-all (config-driven, reports + plot
//                  data out)
//   wild data      fetch -> ingest -> the same analysis subcommands
//   calibration    build-model (samples CSV -> model JSON)
//
// All randomness flows from seeds given on the command line or in the
// config document; rerunning a command with the same inputs reproduces its
// outputs byte for byte.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "verloc/adversary.hpp"
#include "verloc/common.hpp"
#include "verloc/confidence.hpp"
#include "verloc/geo.hpp"
#include "verloc/harness.hpp"
#include "verloc/ingest.hpp"
#include "verloc/localize.hpp"
#include "verloc/netgen.hpp"
#include "verloc/propagation.hpp"
#include "verloc/schedule.hpp"
#include "verloc/wire.hpp"
#include "verloc/zoneverify.hpp"

using nlohmann::json;
using namespace verloc;

namespace {

// ----------------------------------------------------------- file helpers

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

geo::ZoneMap zones_from(const std::string& arg) {
    return geo::ZoneMap::load(arg.empty()
                                  ? find_data_file("zones_europe15.json")
                                  : std::filesystem::path(arg));
}

prop::Model model_from(const std::string& arg) {
    return arg.empty() ? prop::default_model() : prop::load_model(arg);
}

// -------------------------------------------------- network serialization

json network_to_json(const net::Network& network,
                     const std::vector<std::string>& ids = {}) {
    json arr = json::array();
    for (const net::NodeDescriptor& n : network.nodes) {
        json j;
        j["index"] = n.index;
        j["pk"] = sched::bytes_to_hex(n.pk);
        j["address"] = ids.empty() ? "node-" + std::to_string(n.index)
                                   : ids[n.index];
        j["true_lat"] = n.true_loc.lat_deg;
        j["true_lon"] = n.true_loc.lon_deg;
        j["true_zone"] = n.true_zone;
        j["claimed_lat"] = n.claimed_loc.lat_deg;
        j["claimed_lon"] = n.claimed_loc.lon_deg;
        j["claimed_zone"] = n.claimed_zone;
        j["adversarial"] = n.adversarial;
        j["claiming"] = n.claiming;
        arr.push_back(std::move(j));
    }
    return arr;
}

net::Network network_from_json(const json& arr) {
    if (!arr.is_array() || arr.empty())
        throw std::runtime_error("network file must be a non-empty array");
    net::Network network;
    for (const json& j : arr) {
        net::NodeDescriptor n;
        n.index = j.at("index").get<std::uint32_t>();
        n.pk = sched::hex_to_bytes(j.at("pk").get<std::string>());
        n.true_loc = geo::make_point(j.at("true_lat").get<double>(),
                                     j.at("true_lon").get<double>());
        n.true_zone = j.at("true_zone").get<std::string>();
        n.claimed_loc = geo::make_point(j.at("claimed_lat").get<double>(),
                                        j.at("claimed_lon").get<double>());
        n.claimed_zone = j.at("claimed_zone").get<std::string>();
        n.adversarial = j.value("adversarial", false);
        n.claiming = j.value("claiming", false);
        network.nodes.push_back(std::move(n));
    }
    for (std::size_t i = 0; i < network.nodes.size(); ++i)
        if (network.nodes[i].index != i)
            throw std::runtime_error("network file indices must be 0..n-1 in order");
    return network;
}

std::vector<std::string> addresses_from_json(const json& arr) {
    std::vector<std::string> ids;
    for (const json& j : arr) ids.push_back(j.value("address", ""));
    return ids;
}

// ---------------------------------------------- measurement serialization

const char* prov_name(net::Provenance p) {
    switch (p) {
    case net::Provenance::Benign: return "benign";
    case net::Provenance::Spoofed: return "spoofed";
    default: return "delayed";
    }
}

net::Provenance prov_from(const std::string& s) {
    if (s == "benign") return net::Provenance::Benign;
    if (s == "spoofed") return net::Provenance::Spoofed;
    if (s == "delayed") return net::Provenance::Delayed;
    throw std::runtime_error("unknown provenance label: " + s);
}

json measurements_to_json(const net::MeasurementSet& ms,
                          const std::vector<std::uint8_t>& mirrored = {}) {
    json pairs = json::array();
    for (std::size_t k = 0; k < ms.pairs.size(); ++k) {
        const net::PairMeasurement& pm = ms.pairs[k];
        json j;
        j["a"] = pm.a;
        j["b"] = pm.b;
        j["rtt_ab"] = pm.rtt_ab;
        j["rtt_ba"] = pm.rtt_ba;
        j["prov_ab"] = prov_name(pm.prov_ab);
        j["prov_ba"] = prov_name(pm.prov_ba);
        if (!mirrored.empty()) j["mirrored"] = static_cast<bool>(mirrored[k]);
        pairs.push_back(std::move(j));
    }
    json doc;
    doc["format"] = "verloc-measurements-mirror";
    doc["version"] = 1;
    doc["pairs"] = std::move(pairs);
    doc["by_node"] = ms.by_node;
    return doc;
}

net::MeasurementSet measurements_from_json(const json& doc) {
    if (doc.value("format", "") != "verloc-measurements-mirror" ||
        doc.value("version", 0) != 1)
        throw std::runtime_error("unrecognized measurement file format");
    net::MeasurementSet ms;
    for (const json& j : doc.at("pairs")) {
        net::PairMeasurement pm;
        pm.a = j.at("a").get<std::uint32_t>();
        pm.b = j.at("b").get<std::uint32_t>();
        pm.rtt_ab = j.at("rtt_ab").get<double>();
        pm.rtt_ba = j.at("rtt_ba").get<double>();
        pm.prov_ab = prov_from(j.value("prov_ab", "benign"));
        pm.prov_ba = prov_from(j.value("prov_ba", "benign"));
        ms.pairs.push_back(pm);
    }
    ms.by_node = doc.at("by_node").get<std::vector<std::vector<std::size_t>>>();
    for (const auto& list : ms.by_node)
        for (const std::size_t k : list)
            if (k >= ms.pairs.size())
                throw std::runtime_error("by_node refers past the pair list");
    return ms;
}

// --------------------------------------------------- schedule persistence

json schedule_to_json(const sched::Schedule& s) {
    json doc;
    doc["format"] = "verloc-schedule";
    doc["version"] = 1;
    doc["n"] = s.n;
    doc["t"] = s.t;
    doc["refs"] = s.refs;
    return doc;
}

sched::Schedule schedule_from_json(const json& doc) {
    if (doc.value("format", "") != "verloc-schedule")
        throw std::runtime_error("unrecognized schedule file format");
    sched::Schedule s;
    s.n = doc.at("n").get<std::uint32_t>();
    s.t = doc.at("t").get<std::uint32_t>();
    s.refs = doc.at("refs").get<std::vector<std::vector<std::uint32_t>>>();
    if (s.refs.size() != s.n)
        throw std::runtime_error("schedule refs must cover every node");
    return s;
}

// ------------------------------------------------------ analysis plumbing

std::vector<loc::RefObservation> observations_from(const net::Network& network,
                                                   const net::MeasurementSet& ms,
                                                   std::uint32_t i) {
    std::vector<loc::RefObservation> obs;
    for (const std::size_t k : ms.by_node[i]) {
        const net::PairMeasurement& pm = ms.pairs[k];
        const std::uint32_t other = pm.a == i ? pm.b : pm.a;
        obs.push_back({network.nodes[other].claimed_loc,
                       net::symmetric_rtt(pm.rtt_ab, pm.rtt_ba)});
    }
    return obs;
}

std::vector<conf::PairTiming> timings_from(const net::Network& network,
                                           const net::MeasurementSet& ms,
                                           std::uint32_t i) {
    std::vector<conf::PairTiming> timings;
    for (const std::size_t k : ms.by_node[i]) {
        const net::PairMeasurement& pm = ms.pairs[k];
        const std::uint32_t other = pm.a == i ? pm.b : pm.a;
        conf::PairTiming t;
        t.claimed_distance_km = geo::great_circle_km(
            network.nodes[i].claimed_loc, network.nodes[other].claimed_loc);
        t.rtt_out_ms = pm.a == i ? pm.rtt_ab : pm.rtt_ba;
        t.rtt_in_ms = pm.a == i ? pm.rtt_ba : pm.rtt_ab;
        timings.push_back(t);
    }
    return timings;
}

// --------------------------------------------------------- config parsing

harness::AttackConfig attack_config_from(const json& j) {
    harness::AttackConfig atk;
    atk.adversaries = j.at("adversaries").get<std::size_t>();
    atk.claiming = j.at("claiming").get<std::size_t>();
    if (j.contains("perfect_jitter"))
        atk.options.perfect_jitter = j["perfect_jitter"].get<double>();
    if (j.contains("report_jitter"))
        atk.options.report_jitter = j["report_jitter"].get<double>();
    if (j.contains("delay_jitter"))
        atk.options.delay_jitter = j["delay_jitter"].get<double>();
    return atk;
}

harness::ExperimentConfig experiment_config_from(const json& j) {
    static const std::vector<std::string> known = {
        "n",           "t",        "target_refs",  "probes",
        "tau",         "upsilon",  "grid_resolution_deg", "repetitions",
        "master_seed", "zone_map_file", "model_file", "attack"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::runtime_error("unknown config key: " + key);
    }
    harness::ExperimentConfig cfg;
    cfg.n = j.value("n", cfg.n);
    cfg.t = j.value("t", cfg.t);
    cfg.target_refs = j.value("target_refs", cfg.target_refs);
    cfg.probes = j.value("probes", cfg.probes);
    cfg.tau = j.value("tau", cfg.tau);
    cfg.upsilon = j.value("upsilon", cfg.upsilon);
    cfg.grid_resolution_deg =
        j.value("grid_resolution_deg", cfg.grid_resolution_deg);
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.zone_map_file = j.value("zone_map_file", cfg.zone_map_file);
    cfg.model_file = j.value("model_file", cfg.model_file);
    if (j.contains("attack")) cfg.attack = attack_config_from(j["attack"]);
    cfg.validate();
    return cfg;
}

// ----------------------------------------------------- plot data emitters

// Pooled truthful localization errors as an empirical CDF.
std::string error_cdf_csv(const harness::ExperimentReport& report) {
    std::vector<double> errors;
    for (const auto& rep : report.repetitions)
        for (const auto& node : rep.nodes)
            if (!node.claiming) errors.push_back(node.error_km);
    std::sort(errors.begin(), errors.end());
    std::string csv = "error_km,cumulative_fraction\n";
    for (std::size_t i = 0; i < errors.size(); ++i)
        csv += fixed6(errors[i]) + ',' +
               fixed6(static_cast<double>(i + 1) / errors.size()) + '\n';
    return csv;
}

// Confidence histograms for truthful vs. falsely claiming nodes.
std::string confidence_hist_csv(const harness::ExperimentReport& report) {
    constexpr int kBins = 20;
    std::vector<std::size_t> truthful(kBins, 0), claiming(kBins, 0);
    for (const auto& rep : report.repetitions)
        for (const auto& node : rep.nodes) {
            int b = static_cast<int>(node.confidence * kBins);
            b = std::min(std::max(b, 0), kBins - 1);
            (node.claiming ? claiming : truthful)[b]++;
        }
    std::string csv = "confidence_lo,confidence_hi,truthful,claiming\n";
    for (int b = 0; b < kBins; ++b)
        csv += fixed6(static_cast<double>(b) / kBins) + ',' +
               fixed6(static_cast<double>(b + 1) / kBins) + ',' +
               std::to_string(truthful[b]) + ',' +
               std::to_string(claiming[b]) + '\n';
    return csv;
}

std::string sweep_summary_csv(const std::vector<double>& fractions,
                              const std::vector<harness::ExperimentReport>& reports) {
    std::string csv =
        "fraction,median_error_km,zone_rate,recall,fp_median,fp_total,"
        "unprotected_success\n";
    for (std::size_t k = 0; k < reports.size(); ++k) {
        std::vector<double> fps;
        for (const auto& rep : reports[k].repetitions)
            fps.push_back(static_cast<double>(rep.fp));
        std::sort(fps.begin(), fps.end());
        const double fp_median =
            fps.empty() ? 0.0
                        : (fps.size() % 2 ? fps[fps.size() / 2]
                                          : 0.5 * (fps[fps.size() / 2 - 1] +
                                                   fps[fps.size() / 2]));
        csv += fixed6(fractions[k]) + ',' +
               fixed6(reports[k].median_error_km) + ',' +
               fixed6(reports[k].zone_rate) + ',' +
               fixed6(reports[k].recall) + ',' + fixed6(fp_median) + ',' +
               std::to_string(reports[k].total_fp) + ',' +
               fixed6(reports[k].unprotected_success) + '\n';
    }
    return csv;
}

std::string curve_csv(const std::vector<harness::CurvePoint>& curve) {
    std::string csv = "target_refs,t,mean_refs,median_error_km,zone_rate\n";
    for (const auto& p : curve)
        csv += std::to_string(p.target_refs) + ',' + std::to_string(p.t) +
               ',' + fixed6(p.mean_refs) + ',' + fixed6(p.median_error_km) +
               ',' + fixed6(p.zone_rate) + '\n';
    return csv;
}

// -------------------------------------------------------------- commands

struct GenerateArgs {
    std::string zones, out;
    std::size_t n = 0;
    Seed seed = 1;
    std::size_t adversaries = 0, claiming = 0;
    Seed attack_seed = 1;
};

void cmd_generate(const GenerateArgs& a) {
    const geo::ZoneMap map = zones_from(a.zones);
    net::Network network = net::generate_network(map, a.n, a.seed);
    if (a.adversaries > 0) {
        adv::mark_adversaries(network, a.adversaries, a.attack_seed);
        adv::assign_false_claims(network, map, a.claiming, a.attack_seed);
    }
    write_file(a.out, network_to_json(network).dump(1));
    std::cout << "wrote " << a.out << " (" << network.size() << " nodes)\n";
}

struct ScheduleArgs {
    std::string network, out, beacon_hex, beacon_file;
    std::uint32_t t = 50;
};

void cmd_schedule(const ScheduleArgs& a) {
    const net::Network network =
        network_from_json(json::parse(read_file(a.network)));
    sched::Bytes beacon;
    if (!a.beacon_hex.empty())
        beacon = sched::hex_to_bytes(a.beacon_hex);
    else if (!a.beacon_file.empty()) {
        const std::string raw = read_file(a.beacon_file);
        beacon.assign(raw.begin(), raw.end());
    } else
        throw std::runtime_error("need --beacon-hex or --beacon-file");

    std::vector<sched::Bytes> pks;
    for (const auto& node : network.nodes) pks.push_back(node.pk);
    const sched::Schedule schedule = sched::build_schedule(beacon, pks, a.t);
    write_file(a.out, schedule_to_json(schedule).dump(1));

    double total = 0.0;
    for (const auto& refs : schedule.refs) total += refs.size();
    std::cout << "wrote " << a.out << " (mean |R| = "
              << fixed6(total / schedule.n) << ")\n";
}

struct SimulateArgs {
    std::string network, schedule, model, out, wire_dir;
    Seed seed = 1, attack_seed = 1;
    int probes = 200;
    bool apply_attack = false;
};

void cmd_simulate(const SimulateArgs& a) {
    const net::Network network =
        network_from_json(json::parse(read_file(a.network)));
    const sched::Schedule schedule =
        schedule_from_json(json::parse(read_file(a.schedule)));
    const prop::Model model = model_from(a.model);
    const net::PairSampler sampler(network, model, a.seed, a.probes);
    net::MeasurementSet ms = net::build_measurements(network, schedule, sampler);
    if (a.apply_attack)
        adv::apply_attack(model, network, ms, a.attack_seed);
    write_file(a.out, measurements_to_json(ms).dump(1));
    std::cout << "wrote " << a.out << " (" << ms.pairs.size() << " pairs)\n";

    if (!a.wire_dir.empty()) {
        std::filesystem::create_directories(a.wire_dir);
        for (std::uint32_t i = 0; i < schedule.n; ++i) {
            const auto bytes =
                wire::encode_all(net::node_records(ms, schedule, i));
            std::ofstream out(std::filesystem::path(a.wire_dir) /
                                  ("node-" + std::to_string(i) + ".bin"),
                              std::ios::binary | std::ios::trunc);
            out.write(reinterpret_cast<const char*>(bytes.data()),
                      static_cast<std::streamsize>(bytes.size()));
        }
        std::cout << "wrote " << schedule.n << " wire files to " << a.wire_dir
                  << "\n";
    }
}

struct LocalizeArgs {
    std::string network, measurements, model, out;
};

void cmd_localize(const LocalizeArgs& a) {
    const net::Network network =
        network_from_json(json::parse(read_file(a.network)));
    const net::MeasurementSet ms =
        measurements_from_json(json::parse(read_file(a.measurements)));
    const prop::Model model = model_from(a.model);

    std::string csv = "node,est_lat,est_lon,residual_km,error_km_vs_truth\n";
    std::size_t skipped = 0;
    for (std::uint32_t i = 0; i < network.size(); ++i) {
        const auto obs = observations_from(network, ms, i);
        if (obs.size() < 3) {
            ++skipped;
            continue;
        }
        const loc::Result r = loc::estimate_location(model, obs);
        csv += std::to_string(i) + ',' + fixed6(r.estimate.lat_deg) + ',' +
               fixed6(r.estimate.lon_deg) + ',' + fixed6(r.residual_km) +
               ',' +
               fixed6(geo::great_circle_km(r.estimate,
                                           network.nodes[i].true_loc)) +
               '\n';
    }
    write_file(a.out, csv);
    std::cout << "wrote " << a.out;
    if (skipped) std::cout << " (skipped " << skipped << " nodes with <3 refs)";
    std::cout << "\n";
}

struct VerifyZoneArgs {
    std::string network, measurements, zones, model, out, dump;
    double resolution = 0.2;
};

void cmd_verify_zone(const VerifyZoneArgs& a) {
    const net::Network network =
        network_from_json(json::parse(read_file(a.network)));
    const net::MeasurementSet ms =
        measurements_from_json(json::parse(read_file(a.measurements)));
    const geo::ZoneMap map = zones_from(a.zones);
    const prop::Model model = model_from(a.model);
    zone::Options opts;
    opts.resolution_deg = a.resolution;

    std::string csv = "node,claimed_zone,winner_zone,winner_mass,verified\n";
    json dump = json::array();
    for (std::uint32_t i = 0; i < network.size(); ++i) {
        const auto obs = observations_from(network, ms, i);
        if (obs.empty()) continue;
        const zone::Decision d = zone::verify_zone(
            model, map, obs, network.nodes[i].claimed_zone, opts);
        csv += std::to_string(i) + ',' + network.nodes[i].claimed_zone + ',' +
               d.winner + ',' + fixed6(d.winner_mass) + ',' +
               (d.verified ? "1" : "0") + '\n';

        if (!a.dump.empty()) {
            // Full mass table plus the scored grid, for heatmap rendering.
            json masses = json::array();
            for (const auto& zm : d.masses)
                masses.push_back({{"zone", zm.zone_id}, {"mass", zm.mass}});
            const zone::TargetArea area = zone::target_area(obs, opts);
            const auto scores = zone::score_area(model, obs, area);
            json grid = json::array();
            for (std::size_t k = 0; k < area.points.size(); ++k)
                grid.push_back({area.points[k].lat_deg,
                                area.points[k].lon_deg, scores[k]});
            dump.push_back({{"node", i},
                            {"claimed_zone", network.nodes[i].claimed_zone},
                            {"winner", d.winner},
                            {"verified", d.verified},
                            {"unzoned_mass", d.unzoned_mass},
                            {"masses", std::move(masses)},
                            {"resolution_deg", area.resolution_deg},
                            {"grid", std::move(grid)}});
        }
    }
    write_file(a.out, csv);
    std::cout << "wrote " << a.out << "\n";
    if (!a.dump.empty()) {
        write_file(a.dump, dump.dump(1));
        std::cout << "wrote " << a.dump << "\n";
    }
}

struct ConfidenceArgs {
    std::string network, measurements, model, out;
    double tau = conf::kDefaultTolerance;
    double upsilon = conf::kDefaultThreshold;
};

void cmd_confidence(const ConfidenceArgs& a) {
    const net::Network network =
        network_from_json(json::parse(read_file(a.network)));
    const net::MeasurementSet ms =
        measurements_from_json(json::parse(read_file(a.measurements)));
    const prop::Model model = model_from(a.model);

    std::string csv = "node,score,decision,n_pass,n_fail_lower,n_fail_upper\n";
    for (std::uint32_t i = 0; i < network.size(); ++i) {
        const auto timings = timings_from(network, ms, i);
        if (timings.empty()) continue;
        std::size_t pass = 0, fail_lower = 0, fail_upper = 0;
        for (const conf::PairTiming& t : timings) {
            if (conf::pair_within_bounds(model, t, a.tau)) {
                ++pass;
                continue;
            }
            // A failing pair is binned by cause; an impossibly fast
            // direction (envelope breach) outranks a merely slow one.
            const double upper =
                prop::upper_speed_bound(model, t.claimed_distance_km);
            const bool too_fast =
                t.claimed_distance_km / t.rtt_out_ms > upper ||
                t.claimed_distance_km / t.rtt_in_ms > upper;
            (too_fast ? fail_upper : fail_lower)++;
        }
        const double score = conf::confidence_score(model, timings, a.tau);
        csv += std::to_string(i) + ',' + fixed6(score) + ',' +
               (conf::accept(score, a.upsilon) ? "1" : "0") + ',' +
               std::to_string(pass) + ',' + std::to_string(fail_lower) +
               ',' + std::to_string(fail_upper) + '\n';
    }
    write_file(a.out, csv);
    std::cout << "wrote " << a.out << "\n";
}

struct AttackArgs {
    std::string config, out_json, out_csv;
    bool include_nodes = false;
};

void cmd_attack(const AttackArgs& a) {
    const harness::ExperimentConfig cfg =
        experiment_config_from(json::parse(read_file(a.config)));
    if (!cfg.attack)
        throw std::runtime_error("attack config needs an 'attack' section");
    const harness::ExperimentReport report = harness::run_attack(cfg);
    if (!a.out_json.empty())
        write_file(a.out_json, report.to_json(a.include_nodes));
    if (!a.out_csv.empty()) write_file(a.out_csv, report.to_csv());
    std::cout << "attack: fp_total=" << report.total_fp
              << " recall=" << fixed6(report.recall)
              << " unprotected_success=" << fixed6(report.unprotected_success)
              << "\n";
}

struct SweepArgs {
    std::string config, out_dir;
    std::vector<double> fractions;
};

void cmd_sweep(const SweepArgs& a) {
    const harness::ExperimentConfig cfg =
        experiment_config_from(json::parse(read_file(a.config)));
    if (a.fractions.empty())
        throw std::runtime_error("need at least one --fraction");
    const auto reports = harness::sweep_breaking_point(cfg, a.fractions);
    std::filesystem::create_directories(a.out_dir);
    const std::filesystem::path dir(a.out_dir);
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const int pct = static_cast<int>(std::lround(a.fractions[k] * 100));
        const std::string stem = "sweep_f" + std::to_string(pct);
        write_file(dir / (stem + ".json"), reports[k].to_json());
        write_file(dir / (stem + ".csv"), reports[k].to_csv());
    }
    write_file(dir / "sweep_summary.csv",
               sweep_summary_csv(a.fractions, reports));
    std::cout << "wrote " << reports.size() << " sweep reports to " << a.out_dir
              << "\n";
}

struct RunAllArgs {
    std::string config, out_dir;
};

void cmd_run_all(const RunAllArgs& a) {
    const json doc = json::parse(read_file(a.config));
    if (!doc.is_object() || !doc.contains("experiment"))
        throw std::runtime_error("run-all config needs an 'experiment' section");
    const harness::ExperimentConfig cfg =
        experiment_config_from(doc["experiment"]);
    std::filesystem::create_directories(a.out_dir);
    const std::filesystem::path dir(a.out_dir);
    json manifest;
    manifest["config"] = doc;
    json outputs = json::array();

    // Baseline accuracy (attack section stripped).
    harness::ExperimentConfig base_cfg = cfg;
    base_cfg.attack.reset();
    const harness::ExperimentReport baseline = harness::run_baseline(base_cfg);
    write_file(dir / "baseline.json", baseline.to_json());
    write_file(dir / "baseline.csv", baseline.to_csv());
    write_file(dir / "error_cdf.csv", error_cdf_csv(baseline));
    outputs.push_back("baseline.json");
    outputs.push_back("baseline.csv");
    outputs.push_back("error_cdf.csv");
    std::cout << "baseline: median_error_km=" << fixed6(baseline.median_error_km)
              << " zone_rate=" << fixed6(baseline.zone_rate) << "\n";

    if (cfg.attack) {
        const harness::ExperimentReport attack = harness::run_attack(cfg);
        write_file(dir / "attack.json", attack.to_json());
        write_file(dir / "attack.csv", attack.to_csv());
        write_file(dir / "confidence_hist.csv", confidence_hist_csv(attack));
        outputs.push_back("attack.json");
        outputs.push_back("attack.csv");
        outputs.push_back("confidence_hist.csv");
        std::cout << "attack: fp_total=" << attack.total_fp
                  << " recall=" << fixed6(attack.recall) << "\n";
    }

    if (doc.contains("sweep_fractions")) {
        const auto fractions =
            doc["sweep_fractions"].get<std::vector<double>>();
        const auto reports = harness::sweep_breaking_point(cfg, fractions);
        for (std::size_t k = 0; k < reports.size(); ++k) {
            const int pct = static_cast<int>(std::lround(fractions[k] * 100));
            const std::string stem = "sweep_f" + std::to_string(pct);
            write_file(dir / (stem + ".json"), reports[k].to_json());
            write_file(dir / (stem + ".csv"), reports[k].to_csv());
            outputs.push_back(stem + ".json");
            outputs.push_back(stem + ".csv");
        }
        write_file(dir / "sweep_summary.csv",
                   sweep_summary_csv(fractions, reports));
        outputs.push_back("sweep_summary.csv");
        std::cout << "sweep: " << reports.size() << " fractions\n";
    }

    if (doc.contains("reference_targets")) {
        harness::ExperimentConfig curve_cfg = cfg;
        curve_cfg.attack.reset();
        const auto targets =
            doc["reference_targets"].get<std::vector<std::size_t>>();
        const auto curve =
            harness::reference_count_sensitivity(curve_cfg, targets);
        write_file(dir / "reference_curve.csv", curve_csv(curve));
        outputs.push_back("reference_curve.csv");
        std::cout << "reference curve: " << curve.size() << " points\n";
    }

    manifest["outputs"] = std::move(outputs);
    write_file(dir / "manifest.json", manifest.dump(1));
    std::cout << "wrote " << (dir / "manifest.json").string() << "\n";
}

struct BuildModelArgs {
    std::string samples, out;
    prop::BuildOptions options;
};

void cmd_build_model(const BuildModelArgs& a) {
    // Samples CSV: header distance_km,min_rtt_ms.
    const std::string text = read_file(a.samples);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) ||
        line.find("distance_km") == std::string::npos)
        throw std::runtime_error(
            "samples CSV must start with header distance_km,min_rtt_ms");
    std::vector<prop::CalibrationSample> samples;
    std::size_t bad = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double d = 0.0, rtt = 0.0;
        if (std::sscanf(line.c_str(), "%lf,%lf", &d, &rtt) == 2)
            samples.push_back({d, rtt});
        else
            ++bad;
    }
    const std::size_t before = samples.size();
    samples = prop::filter_superluminal(samples);
    const prop::Model model = prop::build_model(samples, a.options);
    prop::save_model(model, a.out);
    std::cout << "wrote " << a.out << " (" << samples.size() << " samples, "
              << (before - samples.size()) << " superluminal dropped, " << bad
              << " malformed rows)\n";
}

struct IngestArgs {
    std::string payloads, descriptors, cities, external, zones, out_dir;
    std::size_t r = 40;
    Seed seed = 1;
};

void cmd_ingest(const IngestArgs& a) {
    const ingest::DirectoryScan scan = ingest::parse_payload_directory(a.payloads);
    const ingest::LocationRows desc =
        ingest::parse_locations_csv(read_file(a.descriptors));
    const ingest::AnalysisInput input =
        ingest::build_analysis_input(scan.files, desc.rows, a.r, a.seed);

    std::filesystem::create_directories(a.out_dir);
    const std::filesystem::path dir(a.out_dir);
    write_file(dir / "network.json",
               network_to_json(input.network, input.ids).dump(1));
    write_file(dir / "measurements.json",
               measurements_to_json(input.measurements, input.pair_mirrored)
                   .dump(1));

    json report;
    report["payloads_parsed"] = scan.files.size();
    json parse_errors = json::array();
    for (const auto& [file, err] : scan.errors)
        parse_errors.push_back({{"file", file}, {"error", err}});
    report["parse_errors"] = std::move(parse_errors);
    report["nodes"] = input.network.size();
    report["measured_nodes"] = input.measured.size();
    report["pairs"] = input.measurements.pairs.size();
    report["mirrored_directions"] = input.mirrored_directions;
    report["unresolved_refs"] = input.unresolved_refs;
    json excluded = json::array();
    for (const auto& e : input.excluded)
        excluded.push_back({{"id", e.id}, {"reason", e.reason}});
    report["excluded"] = std::move(excluded);

    // Self-reported city vs. externally observed location. The external
    // side is the GeoIP-style CSV when given, else the descriptor list.
    if (!a.cities.empty()) {
        const ingest::CityTable cities =
            ingest::CityTable::from_csv(read_file(a.cities));
        std::map<std::string, geo::GeoPoint> external;
        for (const auto& d :
             (a.external.empty()
                  ? desc
                  : ingest::parse_locations_csv(read_file(a.external)))
                 .rows)
            external.emplace(d.id, d.loc);

        const geo::ZoneMap map = zones_from(a.zones);
        std::vector<ingest::ConsistencyRow> rows;
        std::size_t unresolved_cities = 0, ambiguous_cities = 0;
        for (const auto& f : scan.files) {
            if (!f.has_location) continue;
            const auto ext = external.find(f.node);
            if (ext == external.end()) continue;
            const ingest::CityLookup lookup = cities.resolve(f.location);
            if (!lookup.point) {
                (lookup.ambiguous ? ambiguous_cities : unresolved_cities)++;
                continue;
            }
            rows.push_back(ingest::location_consistency(
                f.node, *lookup.point, ext->second, map));
        }
        const ingest::ConsistencyReport consistency =
            ingest::consistency_report(std::move(rows));
        write_file(dir / "consistency.csv", consistency.to_csv());
        report["consistency"] = {
            {"rows", consistency.rows.size()},
            {"median_km", consistency.median_km},
            {"mean_km", consistency.mean_km},
            {"conflict_fraction", consistency.conflict_fraction},
            {"unresolved_cities", unresolved_cities},
            {"ambiguous_cities", ambiguous_cities}};
    }

    write_file(dir / "ingest_report.json", report.dump(1));
    std::cout << "ingested " << input.measured.size() << " of "
              << input.network.size() << " nodes ("
              << input.excluded.size() << " excluded) into " << a.out_dir
              << "\n";
}

struct FetchArgs {
    std::string list, out_dir;
    int timeout_ms = 5000, parallelism = 4;
};

void cmd_fetch(const FetchArgs& a) {
    const ingest::FetchList list = ingest::parse_fetch_list(read_file(a.list));
    if (!list.error.empty())
        throw std::runtime_error("fetch list: " + list.error);
    const auto outcomes = ingest::fetch_payloads(list.targets, a.out_dir,
                                                 a.timeout_ms, a.parallelism);
    std::size_t ok = 0;
    for (const auto& o : outcomes) {
        if (o.ok) {
            ++ok;
            std::cout << o.id << " OK " << o.path.string() << "\n";
        } else {
            std::cout << o.id << " FAIL " << o.error << "\n";
        }
    }
    std::cout << ok << "/" << outcomes.size() << " payloads fetched\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized RTT geo-location verification toolkit"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* sg = app.add_subcommand("generate-network",
                                  "Place nodes area-uniformly over a zone map");
    sg->add_option("--zones", gen.zones, "zone map JSON (default: bundled)");
    sg->add_option("--n", gen.n, "node count")->required();
    sg->add_option("--seed", gen.seed, "placement seed");
    sg->add_option("--adversaries", gen.adversaries, "colluding node count");
    sg->add_option("--claiming", gen.claiming,
                   "adversaries claiming a false zone");
    sg->add_option("--attack-seed", gen.attack_seed, "adversary draw seed");
    sg->add_option("--out", gen.out, "network JSON out")->required();
    sg->callback([&] { cmd_generate(gen); });

    ScheduleArgs sch;
    auto* ss = app.add_subcommand(
        "schedule", "Derive the symmetric reference schedule from a beacon");
    ss->add_option("--network", sch.network, "network JSON")->required();
    ss->add_option("--t", sch.t, "per-node initiated references");
    ss->add_option("--beacon-hex", sch.beacon_hex, "beacon bytes as hex");
    ss->add_option("--beacon-file", sch.beacon_file, "beacon bytes from file");
    ss->add_option("--out", sch.out, "schedule JSON out")->required();
    ss->callback([&] { cmd_schedule(sch); });

    SimulateArgs sim;
    auto* si = app.add_subcommand(
        "simulate", "Run the measurement campaign for a schedule");
    si->add_option("--network", sim.network, "network JSON")->required();
    si->add_option("--schedule", sim.schedule, "schedule JSON")->required();
    si->add_option("--model", sim.model, "propagation model (default: bundled)");
    si->add_option("--seed", sim.seed, "noise seed");
    si->add_option("--probes", sim.probes, "probes per burst");
    si->add_flag("--apply-attack", sim.apply_attack,
                 "rewrite measurements per the network's adversary flags");
    si->add_option("--attack-seed", sim.attack_seed, "attack rewrite seed");
    si->add_option("--out", sim.out, "measurement JSON out")->required();
    si->add_option("--wire-dir", sim.wire_dir,
                   "also write per-node packed 5-byte records here");
    si->callback([&] { cmd_simulate(sim); });

    LocalizeArgs lcz;
    auto* sl = app.add_subcommand("localize",
                                  "Trilaterate every node from its references");
    sl->add_option("--network", lcz.network, "network JSON")->required();
    sl->add_option("--measurements", lcz.measurements, "measurement JSON")
        ->required();
    sl->add_option("--model", lcz.model, "propagation model (default: bundled)");
    sl->add_option("--out", lcz.out, "per-node CSV out")->required();
    sl->callback([&] { cmd_localize(lcz); });

    VerifyZoneArgs vz;
    auto* sv = app.add_subcommand("verify-zone",
                                  "Check claimed zones against target areas");
    sv->add_option("--network", vz.network, "network JSON")->required();
    sv->add_option("--measurements", vz.measurements, "measurement JSON")
        ->required();
    sv->add_option("--zones", vz.zones, "zone map JSON (default: bundled)");
    sv->add_option("--model", vz.model, "propagation model (default: bundled)");
    sv->add_option("--resolution", vz.resolution, "grid resolution, degrees");
    sv->add_option("--out", vz.out, "per-node CSV out")->required();
    sv->add_option("--dump", vz.dump, "full mass/grid JSON for plotting");
    sv->callback([&] { cmd_verify_zone(vz); });

    ConfidenceArgs cf;
    auto* sc = app.add_subcommand("confidence",
                                  "Score measurement pairs against speed bounds");
    sc->add_option("--network", cf.network, "network JSON")->required();
    sc->add_option("--measurements", cf.measurements, "measurement JSON")
        ->required();
    sc->add_option("--model", cf.model, "propagation model (default: bundled)");
    sc->add_option("--tau", cf.tau, "lower-bound tolerance");
    sc->add_option("--upsilon", cf.upsilon, "acceptance threshold");
    sc->add_option("--out", cf.out, "per-node CSV out")->required();
    sc->callback([&] { cmd_confidence(cf); });

    AttackArgs atk;
    auto* sa = app.add_subcommand("attack",
                                  "Run the adversarial experiment from a config");
    sa->add_option("--config", atk.config, "experiment config JSON")->required();
    sa->add_option("--out-json", atk.out_json, "report JSON out");
    sa->add_option("--out-csv", atk.out_csv, "per-repetition CSV out");
    sa->add_flag("--include-nodes", atk.include_nodes,
                 "embed per-node records in the JSON report");
    sa->callback([&] { cmd_attack(atk); });

    SweepArgs swp;
    auto* sw = app.add_subcommand(
        "sweep", "Breaking-point sweep over claiming fractions");
    sw->add_option("--config", swp.config, "experiment config JSON")->required();
    sw->add_option("--fraction", swp.fractions,
                   "claiming fraction (repeatable)")
        ->required();
    sw->add_option("--out-dir", swp.out_dir, "report directory")->required();
    sw->callback([&] { cmd_sweep(swp); });

    RunAllArgs ra;
    auto* sr = app.add_subcommand("run-all",
                                  "Baseline + attack + sweep + curve, one config");
    sr->add_option("--config", ra.config, "full config JSON")->required();
    sr->add_option("--out-dir", ra.out_dir, "output directory")->required();
    sr->callback([&] { cmd_run_all(ra); });

    BuildModelArgs bm;
    auto* sb = app.add_subcommand("build-model",
                                  "Fit a propagation model from samples");
    sb->add_option("--samples", bm.samples,
                   "CSV with header distance_km,min_rtt_ms")
        ->required();
    sb->add_option("--bins", bm.options.bins, "log-spaced distance bins");
    sb->add_option("--min-km", bm.options.min_distance_km, "first bin edge");
    sb->add_option("--max-km", bm.options.max_distance_km, "last bin edge");
    sb->add_option("--envelope-tolerance", bm.options.envelope_tolerance,
                   "upper-bound slack");
    sb->add_option("--probe-scale", bm.options.probe_scale,
                   "per-probe jitter scale");
    sb->add_option("--out", bm.out, "model JSON out")->required();
    sb->callback([&] { cmd_build_model(bm); });

    IngestArgs ing;
    auto* sn = app.add_subcommand(
        "ingest", "Saved payload directory to analysis-ready files");
    sn->add_option("--payloads", ing.payloads, "payload JSON directory")
        ->required();
    sn->add_option("--descriptors", ing.descriptors,
                   "advertised locations CSV (node,lat,lon)")
        ->required();
    sn->add_option("--cities", ing.cities,
                   "city coordinates CSV (name,country,lat,lon)");
    sn->add_option("--external", ing.external,
                   "externally observed locations CSV (node,lat,lon)");
    sn->add_option("--zones", ing.zones, "zone map JSON (default: bundled)");
    sn->add_option("--r", ing.r, "references kept per node");
    sn->add_option("--seed", ing.seed, "reference subset seed");
    sn->add_option("--out-dir", ing.out_dir, "output directory")->required();
    sn->callback([&] { cmd_ingest(ing); });

    FetchArgs fch;
    auto* sf = app.add_subcommand("fetch",
                                  "Retrieve payloads from a node list over HTTP");
    sf->add_option("--list", fch.list, "node list JSON")->required();
    sf->add_option("--out-dir", fch.out_dir, "payload directory")->required();
    sf->add_option("--timeout-ms", fch.timeout_ms, "per-request timeout");
    sf->add_option("--parallelism", fch.parallelism, "concurrent requests");
    sf->callback([&] { cmd_fetch(fch); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
