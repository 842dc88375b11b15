#include "verloc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <utility>

#include <json.hpp>

namespace verloc::harness {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::string& name) {
    std::filesystem::path p(name);
    if (std::filesystem::exists(p)) return p;
    return find_data_file(name);
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + mid);
        m = 0.5 * (lo + m);
    }
    return m;
}

sched::Bytes beacon_bytes(Seed seed) {
    sched::Bytes b(8);
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<std::uint8_t>(seed >> (56 - 8 * i));
    return b;
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

json rep_to_json(const RepetitionResult& r, bool include_nodes) {
    json j{{"rep", r.rep},
           {"seeds",
            {{"network", r.network_seed},
             {"matrix", r.matrix_seed},
             {"beacon", r.beacon_seed},
             {"attack", r.attack_seed}}},
           {"median_error_km", r.median_error_km},
           {"mean_error_km", r.mean_error_km},
           {"zone_rate", r.zone_rate},
           {"mean_reference_count", r.mean_reference_count},
           {"tp", r.tp},
           {"tn", r.tn},
           {"fp", r.fp},
           {"fn", r.fn},
           {"wrong_zone", r.wrong_zone},
           {"rejects", r.rejects},
           {"recall", r.recall},
           {"min_truthful_confidence", r.min_truthful_confidence},
           {"max_claiming_confidence", r.max_claiming_confidence},
           {"unprotected_success", r.unprotected_success}};
    if (include_nodes) {
        json nodes = json::array();
        for (const NodeRecord& n : r.nodes) {
            nodes.push_back(
                {{"index", n.index},
                 {"adversarial", n.adversarial},
                 {"claiming", n.claiming},
                 {"true", {n.true_loc.lat_deg, n.true_loc.lon_deg}},
                 {"claimed", {n.claimed_loc.lat_deg, n.claimed_loc.lon_deg}},
                 {"estimated", {n.estimated_loc.lat_deg, n.estimated_loc.lon_deg}},
                 {"true_zone", n.true_zone},
                 {"claimed_zone", n.claimed_zone},
                 {"winner_zone", n.winner_zone},
                 {"error_km", n.error_km},
                 {"confidence", n.confidence},
                 {"score_accepted", n.score_accepted},
                 {"zone_verified", n.zone_verified},
                 {"reference_count", n.reference_count},
                 {"outcome", outcome_name(n.outcome)}});
        }
        j["nodes"] = std::move(nodes);
    }
    return j;
}

ExperimentReport finalize(ExperimentConfig cfg,
                          std::vector<RepetitionResult> reps) {
    ExperimentReport report;
    report.config = std::move(cfg);
    std::vector<double> med, rate, rec, unprot;
    for (const RepetitionResult& r : reps) {
        med.push_back(r.median_error_km);
        rate.push_back(r.zone_rate);
        rec.push_back(r.recall);
        unprot.push_back(r.unprotected_success);
        report.total_tp += r.tp;
        report.total_tn += r.tn;
        report.total_fp += r.fp;
        report.total_fn += r.fn;
        report.total_wrong_zone += r.wrong_zone;
    }
    report.median_error_km = median(med);
    report.zone_rate = median(rate);
    report.recall = median(rec);
    report.unprotected_success = median(unprot);
    report.repetitions = std::move(reps);
    return report;
}

RepetitionResult run_repetition(const ExperimentConfig& cfg, std::size_t rep,
                                bool with_attack) {
    World w = build_world(cfg, rep);
    if (with_attack) {
        const AttackConfig& atk = *cfg.attack;
        adv::mark_adversaries(w.network, atk.adversaries, w.attack_seed);
        adv::assign_false_claims(w.network, w.map, atk.claiming, w.attack_seed);
        adv::apply_attack(w.model, w.network, w.measurements, w.attack_seed,
                          atk.options);
    }
    RepetitionResult r;
    r.rep = rep;
    r.network_seed = w.network_seed;
    r.matrix_seed = w.matrix_seed;
    r.beacon_seed = w.beacon_seed;
    r.attack_seed = w.attack_seed;
    r.nodes.reserve(w.network.size());
    for (std::uint32_t i = 0; i < w.network.size(); ++i)
        r.nodes.push_back(analyze_node(w, cfg, i));
    summarize(r);
    return r;
}

} // namespace

void ExperimentConfig::validate() const {
    require(n >= 4, "network size must be at least 4");
    require(probes >= 1, "probe count must be positive");
    require(tau >= 0.0 && tau < 1.0, "tau must lie in [0, 1)");
    require(upsilon >= 0.0 && upsilon <= 1.0, "upsilon must lie in [0, 1]");
    require(std::isfinite(grid_resolution_deg) && grid_resolution_deg > 0.0,
            "grid resolution must be positive");
    require(repetitions >= 1, "need at least one repetition");
    require(target_refs < n, "target reference count must be below n");
    const std::size_t te = effective_t();
    require(te >= 1 && te < n, "t must lie in [1, n)");
    if (attack) {
        require(attack->adversaries <= n, "more adversaries than nodes");
        require(attack->claiming <= attack->adversaries,
                "claiming set exceeds the adversary set");
    }
}

std::size_t ExperimentConfig::effective_t() const {
    if (target_refs == 0) return t;
    return sched::pick_t_for_mean(n, static_cast<double>(target_refs));
}

const char* outcome_name(Outcome o) {
    switch (o) {
    case Outcome::TP: return "TP";
    case Outcome::TN: return "TN";
    case Outcome::FP: return "FP";
    case Outcome::FN: return "FN";
    case Outcome::WrongZone: return "wrong_zone";
    }
    return "?";
}

World build_world(const ExperimentConfig& cfg, std::size_t rep) {
    cfg.validate();
    World w{geo::ZoneMap::load(resolve(cfg.zone_map_file)),
            cfg.model_file.empty() ? prop::default_model()
                                   : prop::load_model(resolve(cfg.model_file)),
            {},
            {},
            {},
            derive_seed(cfg.master_seed, "net", rep),
            derive_seed(cfg.master_seed, "mtx", rep),
            derive_seed(cfg.master_seed, "beacon", rep),
            derive_seed(cfg.master_seed, "atk", rep)};

    w.network = net::generate_network(w.map, cfg.n, w.network_seed);
    std::vector<sched::Bytes> pks;
    pks.reserve(cfg.n);
    for (const auto& node : w.network.nodes) pks.push_back(node.pk);
    w.schedule =
        sched::build_schedule(beacon_bytes(w.beacon_seed), pks, cfg.effective_t());
    net::PairSampler sampler(w.network, w.model, w.matrix_seed, cfg.probes);
    w.measurements = net::build_measurements(w.network, w.schedule, sampler);
    return w;
}

std::vector<loc::RefObservation> observations_for(const World& w,
                                                  std::uint32_t i) {
    std::vector<loc::RefObservation> obs;
    obs.reserve(w.measurements.by_node[i].size());
    for (std::size_t idx : w.measurements.by_node[i]) {
        const net::PairMeasurement& pm = w.measurements.pairs[idx];
        const std::uint32_t j = pm.a == i ? pm.b : pm.a;
        obs.push_back({w.network.nodes[j].claimed_loc,
                       net::symmetric_rtt(pm.rtt_ab, pm.rtt_ba)});
    }
    return obs;
}

std::vector<conf::PairTiming> timings_for(const World& w, std::uint32_t i) {
    std::vector<conf::PairTiming> timings;
    timings.reserve(w.measurements.by_node[i].size());
    const geo::GeoPoint mine = w.network.nodes[i].claimed_loc;
    for (std::size_t idx : w.measurements.by_node[i]) {
        const net::PairMeasurement& pm = w.measurements.pairs[idx];
        const std::uint32_t j = pm.a == i ? pm.b : pm.a;
        const double d =
            geo::great_circle_km(mine, w.network.nodes[j].claimed_loc);
        const double out_ms = pm.a == i ? pm.rtt_ab : pm.rtt_ba;
        const double in_ms = pm.a == i ? pm.rtt_ba : pm.rtt_ab;
        timings.push_back({d, out_ms, in_ms});
    }
    return timings;
}

NodeRecord analyze_node(const World& w, const ExperimentConfig& cfg,
                        std::uint32_t i) {
    const net::NodeDescriptor& node = w.network.nodes[i];
    NodeRecord rec;
    rec.index = i;
    rec.adversarial = node.adversarial;
    rec.claiming = node.claiming;
    rec.true_loc = node.true_loc;
    rec.claimed_loc = node.claimed_loc;
    rec.true_zone = node.true_zone;
    rec.claimed_zone = node.claimed_zone;

    const auto obs = observations_for(w, i);
    rec.reference_count = obs.size();

    rec.confidence = conf::confidence_score(w.model, timings_for(w, i), cfg.tau);
    rec.score_accepted = conf::accept(rec.confidence, cfg.upsilon);

    const loc::Result fix = loc::estimate_location(w.model, obs);
    rec.estimated_loc = fix.estimate;
    rec.error_km = geo::great_circle_km(fix.estimate, node.true_loc);

    zone::Options zopt;
    zopt.resolution_deg = cfg.grid_resolution_deg;
    const zone::Decision zd =
        zone::verify_zone(w.model, w.map, obs, node.claimed_zone, zopt);
    rec.winner_zone = zd.winner;
    rec.zone_verified = zd.verified;

    if (!node.claiming) {
        if (!rec.score_accepted) rec.outcome = Outcome::FN;
        else rec.outcome = rec.zone_verified ? Outcome::TP : Outcome::WrongZone;
    } else {
        rec.outcome = rec.score_accepted && rec.zone_verified ? Outcome::FP
                                                              : Outcome::TN;
    }
    return rec;
}

void summarize(RepetitionResult& r) {
    std::vector<double> truthful_errors;
    double err_sum = 0.0;
    std::size_t truthful = 0, truthful_zone_ok = 0, claiming = 0,
                claiming_zone_ok = 0, refs_sum = 0;
    r.tp = r.tn = r.fp = r.fn = r.wrong_zone = r.rejects = 0;
    r.min_truthful_confidence = 1.0;
    r.max_claiming_confidence = 0.0;

    for (const NodeRecord& n : r.nodes) {
        refs_sum += n.reference_count;
        if (!n.score_accepted) ++r.rejects;
        switch (n.outcome) {
        case Outcome::TP: ++r.tp; break;
        case Outcome::TN: ++r.tn; break;
        case Outcome::FP: ++r.fp; break;
        case Outcome::FN: ++r.fn; break;
        case Outcome::WrongZone: ++r.wrong_zone; break;
        }
        if (n.claiming) {
            ++claiming;
            if (n.zone_verified) ++claiming_zone_ok;
            r.max_claiming_confidence =
                std::max(r.max_claiming_confidence, n.confidence);
        } else {
            ++truthful;
            truthful_errors.push_back(n.error_km);
            err_sum += n.error_km;
            if (n.zone_verified) ++truthful_zone_ok;
            r.min_truthful_confidence =
                std::min(r.min_truthful_confidence, n.confidence);
        }
    }

    r.median_error_km = median(std::move(truthful_errors));
    r.mean_error_km = truthful ? err_sum / truthful : 0.0;
    r.zone_rate =
        truthful ? static_cast<double>(truthful_zone_ok) / truthful : 0.0;
    r.mean_reference_count =
        r.nodes.empty() ? 0.0
                        : static_cast<double>(refs_sum) / r.nodes.size();
    r.recall = (r.tp + r.fn) ? static_cast<double>(r.tp) / (r.tp + r.fn) : 1.0;
    r.unprotected_success =
        claiming ? static_cast<double>(claiming_zone_ok) / claiming : 0.0;
}

ExperimentReport run_baseline(const ExperimentConfig& cfg) {
    cfg.validate();
    require(!cfg.attack, "baseline runs take no attack config");
    std::vector<RepetitionResult> reps;
    reps.reserve(cfg.repetitions);
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep)
        reps.push_back(run_repetition(cfg, rep, false));
    return finalize(cfg, std::move(reps));
}

ExperimentReport run_attack(const ExperimentConfig& cfg) {
    cfg.validate();
    require(cfg.attack.has_value(), "attack runs need an attack config");
    std::vector<RepetitionResult> reps;
    reps.reserve(cfg.repetitions);
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep)
        reps.push_back(run_repetition(cfg, rep, true));
    return finalize(cfg, std::move(reps));
}

std::vector<ExperimentReport>
sweep_breaking_point(const ExperimentConfig& cfg,
                     const std::vector<double>& fractions) {
    cfg.validate();
    std::vector<ExperimentReport> out;
    out.reserve(fractions.size());
    for (double f : fractions) {
        require(f > 0.0 && f < 1.0, "claiming fraction must lie in (0, 1)");
        ExperimentConfig step = cfg;
        AttackConfig atk = cfg.attack.value_or(AttackConfig{});
        atk.adversaries = static_cast<std::size_t>(
            std::llround(f * static_cast<double>(cfg.n)));
        atk.claiming = atk.adversaries;
        step.attack = atk;
        out.push_back(run_attack(step));
    }
    return out;
}

std::vector<CurvePoint>
reference_count_sensitivity(const ExperimentConfig& cfg,
                            const std::vector<std::size_t>& ref_targets) {
    cfg.validate();
    std::vector<CurvePoint> curve;
    curve.reserve(ref_targets.size());
    for (std::size_t target : ref_targets) {
        require(target >= 3 && target < cfg.n,
                "reference target must lie in [3, n)");
        ExperimentConfig step = cfg;
        step.attack.reset();
        step.target_refs = target;
        const ExperimentReport report = run_baseline(step);
        CurvePoint pt;
        pt.target_refs = target;
        pt.t = step.effective_t();
        double refs = 0.0;
        for (const auto& rep : report.repetitions)
            refs += rep.mean_reference_count;
        pt.mean_refs = refs / report.repetitions.size();
        pt.median_error_km = report.median_error_km;
        pt.zone_rate = report.zone_rate;
        curve.push_back(pt);
    }
    return curve;
}

std::string ExperimentReport::to_json(bool include_nodes) const {
    json cfg{{"n", config.n},
             {"t", config.t},
             {"target_refs", config.target_refs},
             {"effective_t", config.effective_t()},
             {"probes", config.probes},
             {"tau", config.tau},
             {"upsilon", config.upsilon},
             {"grid_resolution_deg", config.grid_resolution_deg},
             {"repetitions", config.repetitions},
             {"master_seed", config.master_seed},
             {"zone_map_file", config.zone_map_file},
             {"model_file", config.model_file}};
    if (config.attack) {
        cfg["attack"] = {{"adversaries", config.attack->adversaries},
                         {"claiming", config.attack->claiming},
                         {"perfect_jitter", config.attack->options.perfect_jitter},
                         {"report_jitter", config.attack->options.report_jitter},
                         {"delay_jitter", config.attack->options.delay_jitter}};
    }
    json reps = json::array();
    for (const RepetitionResult& r : repetitions)
        reps.push_back(rep_to_json(r, include_nodes));
    const json doc{{"config", std::move(cfg)},
                   {"aggregates",
                    {{"median_error_km", median_error_km},
                     {"zone_rate", zone_rate},
                     {"recall", recall},
                     {"unprotected_success", unprotected_success},
                     {"tp", total_tp},
                     {"tn", total_tn},
                     {"fp", total_fp},
                     {"fn", total_fn},
                     {"wrong_zone", total_wrong_zone}}},
                   {"repetitions", std::move(reps)}};
    return doc.dump(1);
}

std::string ExperimentReport::to_csv() const {
    std::string out =
        "rep,median_error_km,mean_error_km,zone_rate,mean_refs,tp,tn,fp,fn,"
        "wrong_zone,rejects,recall,min_truthful_conf,max_claiming_conf,"
        "unprotected_success\n";
    for (const RepetitionResult& r : repetitions) {
        out += std::to_string(r.rep) + ',' + fixed6(r.median_error_km) + ',' +
               fixed6(r.mean_error_km) + ',' + fixed6(r.zone_rate) + ',' +
               fixed6(r.mean_reference_count) + ',' + std::to_string(r.tp) +
               ',' + std::to_string(r.tn) + ',' + std::to_string(r.fp) + ',' +
               std::to_string(r.fn) + ',' + std::to_string(r.wrong_zone) +
               ',' + std::to_string(r.rejects) + ',' + fixed6(r.recall) + ',' +
               fixed6(r.min_truthful_confidence) + ',' +
               fixed6(r.max_claiming_confidence) + ',' +
               fixed6(r.unprotected_success) + '\n';
    }
    return out;
}

} // namespace verloc::harness
