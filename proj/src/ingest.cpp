#include "verloc/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

namespace verloc::ingest {

namespace {

using nlohmann::json;

// ------------------------------------------------------------ text helpers

// Fold one Unicode codepoint to its bare-ASCII skeleton; nullptr means the
// codepoint has no mapping here and passes through unchanged.
const char* fold_codepoint(unsigned cp) {
    if (cp >= 0xC0 && cp <= 0xFF) {
        static const char* const kLatin1[64] = {
            "a", "a", "a",  "a",  "a", "a", "ae", "c",  // À..Ç
            "e", "e", "e",  "e",  "i", "i", "i",  "i",  // È..Ï
            "d", "n", "o",  "o",  "o", "o", "o",  "",   // Ð..×
            "o", "u", "u",  "u",  "u", "y", "th", "ss", // Ø..ß
            "a", "a", "a",  "a",  "a", "a", "ae", "c",  // à..ç
            "e", "e", "e",  "e",  "i", "i", "i",  "i",  // è..ï
            "d", "n", "o",  "o",  "o", "o", "o",  "",   // ð..÷
            "o", "u", "u",  "u",  "u", "y", "th", "y",  // ø..ÿ
        };
        return kLatin1[cp - 0xC0];
    }
    if (cp >= 0x100 && cp <= 0x17F) {
        struct Range {
            unsigned lo, hi;
            const char* out;
        };
        static const Range kLatinExtA[] = {
            {0x100, 0x105, "a"},  {0x106, 0x10D, "c"}, {0x10E, 0x111, "d"},
            {0x112, 0x11B, "e"},  {0x11C, 0x123, "g"}, {0x124, 0x127, "h"},
            {0x128, 0x131, "i"},  {0x132, 0x133, "ij"}, {0x134, 0x135, "j"},
            {0x136, 0x138, "k"},  {0x139, 0x142, "l"}, {0x143, 0x14B, "n"},
            {0x14C, 0x151, "o"},  {0x152, 0x153, "oe"}, {0x154, 0x159, "r"},
            {0x15A, 0x161, "s"},  {0x162, 0x167, "t"}, {0x168, 0x173, "u"},
            {0x174, 0x175, "w"},  {0x176, 0x178, "y"}, {0x179, 0x17E, "z"},
            {0x17F, 0x17F, "s"},
        };
        for (const Range& r : kLatinExtA)
            if (cp >= r.lo && cp <= r.hi) return r.out;
    }
    return nullptr;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// One CSV row, double-quote aware ("" escapes a quote inside quotes).
std::vector<std::string> csv_fields(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> csv_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string line(text.substr(start, end - start));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = end + 1;
        if (start == text.size() + 1) break;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && std::isfinite(out);
}

double median_of(std::vector<double> v) {
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

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

// ------------------------------------------------------------------ payloads

std::string RawMeasurementFile::to_json() const {
    json j;
    j["format"] = "verloc-measurements";
    j["version"] = 1;
    j["node"] = node;
    if (has_location) j["location"] = location;
    json arr = json::array();
    for (const MeasurementEntry& e : measurements)
        arr.push_back({{"min_rtt_ms", e.min_rtt_ms}, {"ref", e.ref}});
    j["measurements"] = std::move(arr);
    return j.dump(1);
}

ParseResult parse_measurement_file(std::string_view bytes) {
    ParseResult result;
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::exception& e) {
        result.error = e.what();
        return result;
    }
    if (!j.is_object()) {
        result.error = "top level must be a JSON object";
        return result;
    }
    if (j.contains("format") &&
        (!j["format"].is_string() || j["format"] != "verloc-measurements")) {
        result.error = "unrecognized format marker";
        return result;
    }
    if (j.contains("version") &&
        (!j["version"].is_number_integer() || j["version"] != 1)) {
        result.error = "unsupported payload version";
        return result;
    }
    if (!j.contains("node") || !j["node"].is_string() ||
        j["node"].get<std::string>().empty()) {
        result.error = "missing or empty 'node' identity";
        return result;
    }
    if (j.contains("location") && !j["location"].is_string()) {
        result.error = "'location' must be a string when present";
        return result;
    }
    if (!j.contains("measurements") || !j["measurements"].is_array()) {
        result.error = "missing 'measurements' array";
        return result;
    }

    RawMeasurementFile file;
    file.node = j["node"].get<std::string>();
    if (j.contains("location")) {
        file.location = j["location"].get<std::string>();
        file.has_location = true;
    }
    for (const json& entry : j["measurements"]) {
        if (!entry.is_object() || !entry.contains("ref") ||
            !entry["ref"].is_string() ||
            entry["ref"].get<std::string>().empty() ||
            !entry.contains("min_rtt_ms") ||
            !entry["min_rtt_ms"].is_number()) {
            ++file.dropped_malformed;
            continue;
        }
        const double rtt = entry["min_rtt_ms"].get<double>();
        if (!std::isfinite(rtt) || rtt <= 0.0) {
            ++file.dropped_nonpositive;
            continue;
        }
        file.measurements.push_back({entry["ref"].get<std::string>(), rtt});
    }
    result.file = std::move(file);
    return result;
}

DirectoryScan parse_payload_directory(const std::filesystem::path& dir) {
    require(std::filesystem::is_directory(dir),
            "payload path is not a directory");
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());

    DirectoryScan scan;
    for (const auto& p : paths) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        ParseResult r = parse_measurement_file(buf.str());
        if (r.ok())
            scan.files.push_back(std::move(*r.file));
        else
            scan.errors.emplace_back(p.filename().string(), std::move(r.error));
    }
    std::sort(scan.files.begin(), scan.files.end(),
              [](const auto& a, const auto& b) { return a.node < b.node; });
    return scan;
}

// ---------------------------------------------------------------- city table

std::string normalize_place(std::string_view name) {
    std::string folded;
    folded.reserve(name.size());
    for (std::size_t i = 0; i < name.size();) {
        const unsigned char c = static_cast<unsigned char>(name[i]);
        if (c < 0x80) {
            folded += static_cast<char>(std::tolower(c));
            ++i;
            continue;
        }
        // Two-byte UTF-8 covers every codepoint we fold.
        if ((c & 0xE0) == 0xC0 && i + 1 < name.size() &&
            (static_cast<unsigned char>(name[i + 1]) & 0xC0) == 0x80) {
            const unsigned cp = ((c & 0x1Fu) << 6) |
                                (static_cast<unsigned char>(name[i + 1]) & 0x3Fu);
            if (const char* out = fold_codepoint(cp)) {
                folded += out;
            } else {
                folded += name[i];
                folded += name[i + 1];
            }
            i += 2;
            continue;
        }
        folded += static_cast<char>(c);
        ++i;
    }
    // Trim and collapse runs of whitespace.
    std::string out;
    bool pending_space = false;
    for (const char c : folded) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += c;
    }
    return out;
}

CityTable CityTable::from_csv(std::string_view text) {
    const auto lines = csv_lines(text);
    require(!lines.empty(), "city table is empty");
    {
        const auto header = csv_fields(lines[0]);
        require(header.size() == 4 && lower(trim(header[0])) == "name" &&
                    lower(trim(header[1])) == "country" &&
                    lower(trim(header[2])) == "lat" &&
                    lower(trim(header[3])) == "lon",
                "city table must start with header name,country,lat,lon");
    }
    CityTable table;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv_fields(lines[i]);
        double lat = 0.0, lon = 0.0;
        if (f.size() != 4 || !parse_double(f[2], lat) ||
            !parse_double(f[3], lon) || std::abs(lat) > 90.0 ||
            std::abs(lon) > 180.0) {
            ++table.skipped_;
            continue;
        }
        const std::string name = normalize_place(f[0]);
        const std::string country = lower(trim(f[1]));
        if (name.empty() || country.empty()) {
            ++table.skipped_;
            continue;
        }
        auto [it, inserted] =
            table.by_name_[name].emplace(country, geo::make_point(lat, lon));
        if (inserted)
            ++table.records_;
        else
            ++table.skipped_; // duplicate key: first occurrence wins
    }
    return table;
}

CityLookup CityTable::resolve(std::string_view name,
                              std::string_view country_hint) const {
    CityLookup out;
    const std::string key = normalize_place(name);
    if (key.empty()) return out;
    const auto it = by_name_.find(key);
    if (it == by_name_.end()) return out;
    const auto& countries = it->second;
    if (!country_hint.empty()) {
        const auto c = countries.find(lower(trim(country_hint)));
        if (c != countries.end()) out.point = c->second;
        return out;
    }
    if (countries.size() == 1) {
        out.point = countries.begin()->second;
        return out;
    }
    out.ambiguous = true;
    return out;
}

// ----------------------------------------------------------- analysis input

LocationRows parse_locations_csv(std::string_view text) {
    const auto lines = csv_lines(text);
    require(!lines.empty(), "location table is empty");
    {
        const auto header = csv_fields(lines[0]);
        require(header.size() == 3 && lower(trim(header[0])) == "node" &&
                    lower(trim(header[1])) == "lat" &&
                    lower(trim(header[2])) == "lon",
                "location table must start with header node,lat,lon");
    }
    LocationRows rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv_fields(lines[i]);
        double lat = 0.0, lon = 0.0;
        if (f.size() != 3 || trim(f[0]).empty() || !parse_double(f[1], lat) ||
            !parse_double(f[2], lon) || std::abs(lat) > 90.0 ||
            std::abs(lon) > 180.0) {
            ++rows.skipped;
            continue;
        }
        rows.rows.push_back({trim(f[0]), geo::make_point(lat, lon)});
    }
    return rows;
}

std::uint32_t AnalysisInput::index_of(std::string_view id) const {
    const auto it = std::lower_bound(ids.begin(), ids.end(), id);
    require(it != ids.end() && *it == id, "unknown node identity");
    return static_cast<std::uint32_t>(it - ids.begin());
}

AnalysisInput build_analysis_input(const std::vector<RawMeasurementFile>& files,
                                   const std::vector<Descriptor>& descriptors,
                                   std::size_t r, Seed seed) {
    require(r >= 3, "need at least 3 references per node");
    require(!descriptors.empty(), "descriptor list is empty");

    AnalysisInput out;
    std::vector<Descriptor> sorted = descriptors;
    std::sort(sorted.begin(), sorted.end(),
              [](const Descriptor& a, const Descriptor& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        require(sorted[i].id != sorted[i - 1].id,
                "duplicate descriptor identity");

    out.ids.reserve(sorted.size());
    out.network.nodes.reserve(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        require(geo::is_valid(sorted[i].loc), "descriptor location invalid");
        net::NodeDescriptor node;
        node.index = static_cast<std::uint32_t>(i);
        node.pk.assign(sorted[i].id.begin(), sorted[i].id.end());
        node.true_loc = node.claimed_loc = sorted[i].loc;
        out.network.nodes.push_back(std::move(node));
        out.ids.push_back(sorted[i].id);
    }

    // First payload per identity wins; extras are reported, not merged.
    std::map<std::string, const RawMeasurementFile*> file_of;
    for (const RawMeasurementFile& f : files) {
        if (!file_of.emplace(f.node, &f).second)
            out.excluded.push_back({f.node, "duplicate payload"});
    }

    // The forward RTT an identity reported toward another, first entry wins.
    const auto reported = [&](const std::string& from,
                              const std::string& to) -> const double* {
        const auto it = file_of.find(from);
        if (it == file_of.end()) return nullptr;
        for (const MeasurementEntry& e : it->second->measurements)
            if (e.ref == to) return &e.min_rtt_ms;
        return nullptr;
    };

    struct Directed {
        double rtt = 0.0;
        bool present = false;
    };
    struct PairSlot {
        Directed ab, ba;
        bool a_selected = false, b_selected = false;
    };
    std::map<std::pair<std::uint32_t, std::uint32_t>, PairSlot> slots;

    for (const auto& [id, file] : file_of) {
        const auto idx_it = std::lower_bound(out.ids.begin(), out.ids.end(), id);
        if (idx_it == out.ids.end() || *idx_it != id) {
            out.excluded.push_back({id, "no descriptor for node"});
            continue;
        }
        const std::uint32_t i =
            static_cast<std::uint32_t>(idx_it - out.ids.begin());

        // Usable candidates: resolvable, not the node itself, first mention
        // of each reference.
        std::vector<std::pair<std::uint32_t, double>> candidates;
        std::set<std::uint32_t> seen;
        for (const MeasurementEntry& e : file->measurements) {
            const auto ref_it =
                std::lower_bound(out.ids.begin(), out.ids.end(), e.ref);
            if (ref_it == out.ids.end() || *ref_it != e.ref) {
                ++out.unresolved_refs;
                continue;
            }
            const std::uint32_t j =
                static_cast<std::uint32_t>(ref_it - out.ids.begin());
            if (j == i || !seen.insert(j).second) continue;
            candidates.emplace_back(j, e.min_rtt_ms);
        }

        // Seeded shuffle, then keep the first r distinct advertised
        // locations; a duplicate location is skipped and the walk continues,
        // which is the "discard and redraw" rule.
        Rng rng = make_rng(derive_seed(seed, "subset", i));
        for (std::size_t k = candidates.size(); k > 1; --k)
            std::swap(candidates[k - 1],
                      candidates[uniform_index(rng, k)]);
        std::vector<std::pair<std::uint32_t, double>> picked;
        std::set<std::pair<double, double>> locations;
        for (const auto& [j, rtt] : candidates) {
            const geo::GeoPoint& p = out.network.nodes[j].claimed_loc;
            if (!locations.emplace(p.lat_deg, p.lon_deg).second) continue;
            picked.emplace_back(j, rtt);
            if (picked.size() == r) break;
        }
        if (picked.size() < r) {
            out.excluded.push_back(
                {id, "fewer than r distinct-location references"});
            continue;
        }

        out.measured.push_back(i);
        for (const auto& [j, rtt] : picked) {
            const auto key = std::minmax(i, j);
            PairSlot& slot = slots[{key.first, key.second}];
            if (i < j) {
                slot.ab = {rtt, true};
                slot.a_selected = true;
            } else {
                slot.ba = {rtt, true};
                slot.b_selected = true;
            }
        }
    }

    out.measurements.by_node.assign(out.network.size(), {});
    for (auto& [key, slot] : slots) {
        const auto [a, b] = key;
        net::PairMeasurement pm;
        pm.a = a;
        pm.b = b;
        bool mirrored = false;
        if (!slot.ab.present) {
            if (const double* v = reported(out.ids[a], out.ids[b])) {
                slot.ab = {*v, true};
            } else {
                slot.ab = {slot.ba.rtt, true};
                mirrored = true;
                ++out.mirrored_directions;
            }
        }
        if (!slot.ba.present) {
            if (const double* v = reported(out.ids[b], out.ids[a])) {
                slot.ba = {*v, true};
            } else {
                slot.ba = {slot.ab.rtt, true};
                mirrored = true;
                ++out.mirrored_directions;
            }
        }
        pm.rtt_ab = slot.ab.rtt;
        pm.rtt_ba = slot.ba.rtt;
        const std::size_t idx = out.measurements.pairs.size();
        out.measurements.pairs.push_back(pm);
        out.pair_mirrored.push_back(mirrored ? 1 : 0);
        if (slot.a_selected) out.measurements.by_node[a].push_back(idx);
        if (slot.b_selected) out.measurements.by_node[b].push_back(idx);
    }
    return out;
}

// -------------------------------------------------------- consistency check

ConsistencyRow location_consistency(const std::string& node,
                                    const geo::GeoPoint& self_loc,
                                    const geo::GeoPoint& external_loc,
                                    const geo::ZoneMap& zones) {
    require(geo::is_valid(self_loc) && geo::is_valid(external_loc),
            "consistency check needs valid points");
    ConsistencyRow row;
    row.node = node;
    row.distance_km = geo::great_circle_km(self_loc, external_loc);
    if (const geo::Zone* z = zones.zone_of(self_loc)) row.self_zone = z->id;
    if (const geo::Zone* z = zones.zone_of(external_loc)) row.external_zone = z->id;
    row.country_conflict = !row.self_zone.empty() &&
                           !row.external_zone.empty() &&
                           row.self_zone != row.external_zone;
    return row;
}

ConsistencyReport consistency_report(std::vector<ConsistencyRow> rows) {
    ConsistencyReport report;
    std::vector<double> distances;
    distances.reserve(rows.size());
    std::size_t conflicts = 0;
    double sum = 0.0;
    for (const ConsistencyRow& r : rows) {
        distances.push_back(r.distance_km);
        sum += r.distance_km;
        if (r.country_conflict) ++conflicts;
    }
    report.median_km = median_of(std::move(distances));
    report.mean_km = rows.empty() ? 0.0 : sum / rows.size();
    report.conflict_fraction =
        rows.empty() ? 0.0 : static_cast<double>(conflicts) / rows.size();
    report.rows = std::move(rows);
    return report;
}

std::string ConsistencyReport::to_csv() const {
    std::string out = "node,distance_km,self_zone,external_zone,conflict\n";
    for (const ConsistencyRow& r : rows) {
        out += r.node + ',' + fixed6(r.distance_km) + ',' + r.self_zone + ',' +
               r.external_zone + ',' + (r.country_conflict ? '1' : '0') + '\n';
    }
    return out;
}

// ------------------------------------------------------------- fetch helper

FetchList parse_fetch_list(std::string_view bytes) {
    FetchList list;
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::exception& e) {
        list.error = e.what();
        return list;
    }
    if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array()) {
        list.error = "fetch list must be an object with a 'nodes' array";
        return list;
    }
    for (const json& n : j["nodes"]) {
        if (!n.is_object() || !n.contains("id") || !n["id"].is_string() ||
            !n.contains("url") || !n["url"].is_string() ||
            n["id"].get<std::string>().empty() ||
            n["url"].get<std::string>().empty()) {
            list.error = "every fetch entry needs non-empty 'id' and 'url'";
            list.targets.clear();
            return list;
        }
        list.targets.push_back(
            {n["id"].get<std::string>(), n["url"].get<std::string>()});
    }
    return list;
}

namespace {

std::string sanitize_id(const std::string& id) {
    std::string out;
    for (const char c : id) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) ||
                        c == '.' || c == '_' || c == '-';
        out += ok ? c : '_';
    }
    return out.empty() ? "node" : out;
}

FetchOutcome fetch_one(const FetchTarget& target,
                       const std::filesystem::path& out_dir, int timeout_ms) {
    FetchOutcome outcome;
    outcome.id = target.id;
    const std::string& url = target.url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http") {
        outcome.error = "only http:// urls are supported";
        return outcome;
    }
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string base =
        path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(timeout_ms / 1000,
                                  (timeout_ms % 1000) * 1000);
    client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    const httplib::Result res = client.Get(path);
    if (!res) {
        outcome.error = httplib::to_string(res.error());
        return outcome;
    }
    outcome.status = res->status;
    if (res->status != 200) {
        outcome.error = "http status " + std::to_string(res->status);
        return outcome;
    }
    const std::filesystem::path dest =
        out_dir / (sanitize_id(target.id) + ".json");
    std::ofstream file(dest, std::ios::binary | std::ios::trunc);
    if (!file) {
        outcome.error = "cannot write " + dest.string();
        return outcome;
    }
    file.write(res->body.data(),
               static_cast<std::streamsize>(res->body.size()));
    outcome.ok = true;
    outcome.path = dest;
    return outcome;
}

} // namespace

std::vector<FetchOutcome> fetch_payloads(const std::vector<FetchTarget>& targets,
                                         const std::filesystem::path& out_dir,
                                         int timeout_ms, int parallelism) {
    require(timeout_ms > 0, "timeout must be positive");
    require(parallelism >= 1, "parallelism must be at least 1");
    std::filesystem::create_directories(out_dir);
    std::vector<FetchOutcome> outcomes(targets.size());
    std::atomic<std::size_t> next{0};
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(parallelism),
                              std::max<std::size_t>(targets.size(), 1));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < targets.size();
                 i = next.fetch_add(1))
                outcomes[i] = fetch_one(targets[i], out_dir, timeout_ms);
        });
    }
    for (std::thread& t : pool) t.join();
    return outcomes;
}

} // namespace verloc::ingest
