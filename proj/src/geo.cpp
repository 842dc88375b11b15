#include "verloc/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "verloc/common.hpp"
#include <json.hpp>

namespace verloc::geo {

GeoPoint make_point(double lat_deg, double lon_deg) {
    require(std::isfinite(lat_deg) && std::isfinite(lon_deg),
            "geo: coordinates must be finite");
    require(lat_deg >= -90.0 && lat_deg <= 90.0,
            "geo: latitude out of [-90, 90]");
    double lon = std::fmod(lon_deg, 360.0);
    if (lon <= -180.0) lon += 360.0;
    if (lon > 180.0) lon -= 360.0;
    return GeoPoint{lat_deg, lon};
}

bool is_valid(const GeoPoint& p) {
    return std::isfinite(p.lat_deg) && std::isfinite(p.lon_deg) &&
           p.lat_deg >= -90.0 && p.lat_deg <= 90.0 &&
           p.lon_deg > -180.0 && p.lon_deg <= 180.0;
}

double great_circle_km(const GeoPoint& a, const GeoPoint& b) {
    const double lat1 = a.lat_deg * kDegToRad;
    const double lat2 = b.lat_deg * kDegToRad;
    const double dlat = (b.lat_deg - a.lat_deg) * kDegToRad;
    const double dlon = (b.lon_deg - a.lon_deg) * kDegToRad;
    const double sl = std::sin(dlat / 2.0);
    const double so = std::sin(dlon / 2.0);
    const double h = sl * sl + std::cos(lat1) * std::cos(lat2) * so * so;
    const double root = std::sqrt(std::min(1.0, std::max(0.0, h)));
    return 2.0 * kEarthRadiusKm * std::asin(root);
}

Vec3 to_unit(const GeoPoint& p) {
    const double lat = p.lat_deg * kDegToRad;
    const double lon = p.lon_deg * kDegToRad;
    const double cl = std::cos(lat);
    return Vec3{cl * std::cos(lon), cl * std::sin(lon), std::sin(lat)};
}

GeoPoint from_unit(const Vec3& v) {
    const double norm = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    require(norm > 0.0, "geo: zero vector has no direction");
    const double z = std::min(1.0, std::max(-1.0, v.z / norm));
    return GeoPoint{std::asin(z) * kRadToDeg, std::atan2(v.y, v.x) * kRadToDeg};
}

double arc_km(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    const double chord = std::sqrt(dx * dx + dy * dy + dz * dz);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, chord / 2.0));
}

GeoPoint offset_km(const GeoPoint& p, double east_km, double north_km) {
    const double dlat = (north_km / kEarthRadiusKm) * kRadToDeg;
    const double coslat = std::max(0.01, std::cos(p.lat_deg * kDegToRad));
    const double dlon = (east_km / (kEarthRadiusKm * coslat)) * kRadToDeg;
    double lat = std::min(90.0, std::max(-90.0, p.lat_deg + dlat));
    return make_point(lat, p.lon_deg + dlon);
}

namespace {

bool on_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
    const double eps = 1e-12;
    const double cross = (b.lon_deg - a.lon_deg) * (p.lat_deg - a.lat_deg) -
                         (b.lat_deg - a.lat_deg) * (p.lon_deg - a.lon_deg);
    if (std::abs(cross) > eps) return false;
    return p.lat_deg >= std::min(a.lat_deg, b.lat_deg) - eps &&
           p.lat_deg <= std::max(a.lat_deg, b.lat_deg) + eps &&
           p.lon_deg >= std::min(a.lon_deg, b.lon_deg) - eps &&
           p.lon_deg <= std::max(a.lon_deg, b.lon_deg) + eps;
}

// Signed spherical excess of the triangle (a, b, c) via l'Huilier, with the
// orientation sign taken from the triple product.
double signed_triangle_steradians(const Vec3& a, const Vec3& b, const Vec3& c) {
    auto angle = [](const Vec3& u, const Vec3& v) {
        const double dx = u.x - v.x, dy = u.y - v.y, dz = u.z - v.z;
        const double chord = std::sqrt(dx * dx + dy * dy + dz * dz) / 2.0;
        return 2.0 * std::asin(std::min(1.0, chord));
    };
    const double ab = angle(a, b), bc = angle(b, c), ca = angle(c, a);
    const double s = (ab + bc + ca) / 2.0;
    const double t = std::tan(s / 2.0) * std::tan((s - ab) / 2.0) *
                     std::tan((s - bc) / 2.0) * std::tan((s - ca) / 2.0);
    const double excess = 4.0 * std::atan(std::sqrt(std::max(0.0, t)));
    const double triple = a.x * (b.y * c.z - b.z * c.y) -
                          a.y * (b.x * c.z - b.z * c.x) +
                          a.z * (b.x * c.y - b.y * c.x);
    return triple >= 0.0 ? excess : -excess;
}

} // namespace

bool point_in_polygon(const GeoPoint& p, const std::vector<GeoPoint>& verts) {
    require(verts.size() >= 3, "geo: polygon needs at least 3 vertices");
    const std::size_t n = verts.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const GeoPoint& a = verts[j];
        const GeoPoint& b = verts[i];
        if (on_segment(p, a, b)) return true;
        const bool crosses = (b.lat_deg > p.lat_deg) != (a.lat_deg > p.lat_deg);
        if (crosses) {
            const double x = (a.lon_deg - b.lon_deg) *
                                 (p.lat_deg - b.lat_deg) /
                                 (a.lat_deg - b.lat_deg) +
                             b.lon_deg;
            if (p.lon_deg < x) inside = !inside;
        }
    }
    return inside;
}

ZoneMap ZoneMap::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("zone map not readable: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

ZoneMap ZoneMap::parse(const std::string& json_text) {
    nlohmann::json doc = nlohmann::json::parse(json_text);
    require(doc.value("format", "") == "verloc-zonemap",
            "zone map: unrecognized format tag");
    require(doc.value("version", 0) == 1, "zone map: unsupported version");

    ZoneMap map;
    std::set<std::string> seen;
    for (const auto& jz : doc.at("zones")) {
        Zone z;
        z.id = jz.at("id").get<std::string>();
        require(!z.id.empty(), "zone map: empty zone id");
        require(seen.insert(z.id).second, "zone map: duplicate zone id " + z.id);
        for (const auto& v : jz.at("vertices")) {
            require(v.is_array() && v.size() == 2,
                    "zone map: vertex must be [lat, lon]");
            z.vertices.push_back(
                make_point(v[0].get<double>(), v[1].get<double>()));
        }
        require(z.vertices.size() >= 3,
                "zone map: zone " + z.id + " needs at least 3 vertices");
        map.zones_.push_back(std::move(z));
    }
    require(!map.zones_.empty(), "zone map: no zones");
    std::sort(map.zones_.begin(), map.zones_.end(),
              [](const Zone& a, const Zone& b) { return a.id < b.id; });
    map.index();
    return map;
}

void ZoneMap::index() {
    boxes_.clear();
    bool first = true;
    for (const Zone& z : zones_) {
        Bounds b{90.0, -90.0, 180.0, -180.0};
        for (const GeoPoint& v : z.vertices) {
            b.min_lat = std::min(b.min_lat, v.lat_deg);
            b.max_lat = std::max(b.max_lat, v.lat_deg);
            b.min_lon = std::min(b.min_lon, v.lon_deg);
            b.max_lon = std::max(b.max_lon, v.lon_deg);
        }
        boxes_.push_back(b);
        if (first) {
            bounds_ = b;
            first = false;
        } else {
            bounds_.min_lat = std::min(bounds_.min_lat, b.min_lat);
            bounds_.max_lat = std::max(bounds_.max_lat, b.max_lat);
            bounds_.min_lon = std::min(bounds_.min_lon, b.min_lon);
            bounds_.max_lon = std::max(bounds_.max_lon, b.max_lon);
        }
    }
}

const Zone* ZoneMap::find(std::string_view id) const {
    auto it = std::lower_bound(
        zones_.begin(), zones_.end(), id,
        [](const Zone& z, std::string_view key) { return z.id < key; });
    if (it == zones_.end() || it->id != id) return nullptr;
    return &*it;
}

const Zone* ZoneMap::zone_of(const GeoPoint& p) const {
    for (std::size_t i = 0; i < zones_.size(); ++i) {
        const Bounds& b = boxes_[i];
        if (p.lat_deg < b.min_lat || p.lat_deg > b.max_lat ||
            p.lon_deg < b.min_lon || p.lon_deg > b.max_lon)
            continue;
        if (point_in_polygon(p, zones_[i].vertices)) return &zones_[i];
    }
    return nullptr;
}

bool ZoneMap::contains(std::string_view zone_id, const GeoPoint& p) const {
    const Zone* z = find(zone_id);
    require(z != nullptr, "zone map: unknown zone id");
    return point_in_polygon(p, z->vertices);
}

double ZoneMap::zone_area_km2(std::string_view id) const {
    const Zone* z = find(id);
    require(z != nullptr, "zone map: unknown zone id");
    const auto& v = z->vertices;
    const Vec3 origin = to_unit(v[0]);
    double steradians = 0.0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        steradians +=
            signed_triangle_steradians(origin, to_unit(v[i]), to_unit(v[i + 1]));
    }
    return std::abs(steradians) * kEarthRadiusKm * kEarthRadiusKm;
}

double ZoneMap::total_area_km2() const {
    double total = 0.0;
    for (const Zone& z : zones_) total += zone_area_km2(z.id);
    return total;
}

std::vector<GeoPoint> make_grid(double min_lat, double max_lat, double min_lon,
                                double max_lon, double resolution_deg) {
    require(resolution_deg > 0.0, "grid: resolution must be positive");
    require(max_lat >= min_lat && max_lon >= min_lon,
            "grid: bounds must be ordered");
    require(min_lat >= -90.0 && max_lat <= 90.0, "grid: latitude out of range");
    const auto steps = [&](double lo, double hi) {
        return static_cast<std::size_t>(
                   std::floor((hi - lo) / resolution_deg + 1e-9)) +
               1;
    };
    const std::size_t n_lat = steps(min_lat, max_lat);
    const std::size_t n_lon = steps(min_lon, max_lon);
    std::vector<GeoPoint> grid;
    grid.reserve(n_lat * n_lon);
    for (std::size_t i = 0; i < n_lat; ++i) {
        const double lat = min_lat + static_cast<double>(i) * resolution_deg;
        for (std::size_t j = 0; j < n_lon; ++j) {
            const double lon = min_lon + static_cast<double>(j) * resolution_deg;
            grid.push_back(GeoPoint{lat, lon});
        }
    }
    return grid;
}

} // namespace verloc::geo
