#include "kgscatter/scene_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "kgscatter/errors.hpp"

namespace kgs {

using nlohmann::json;

namespace {

Vec3 vec_of(const json& j, const char* key, const Vec3& def)
{
    if (!j.contains(key)) return def;
    const json& a = j.at(key);
    if (!a.is_array() || a.size() != 3)
        throw Error(ErrorKind::Config, std::string("'") + key + "' must be a 3-vector");
    return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

template <class T>
T get_or(const json& j, const char* key, T def)
{
    return j.contains(key) ? j.at(key).get<T>() : def;
}

const std::set<std::string> kMagnetic = {"ab_torus", "coulomb_gauge", "longrange_tail", "vortex",
                                         "gaussian_gauge"};
const std::set<std::string> kElectric = {"gaussian_electric", "algebraic_electric",
                                         "odd_algebraic_electric"};

DecayClass parse_decay(const std::string& s)
{
    if (s.rfind("SR:", 0) == 0) return DecayClass::short_range(std::stod(s.substr(3)));
    if (s == "LR") return DecayClass::long_range();
    if (s.rfind("LR:", 0) == 0) return DecayClass::long_range_delta(std::stod(s.substr(3)));
    throw Error(ErrorKind::Config, "unknown decay tag '" + s + "' (use SR:<zeta>, LR or LR:<delta>)");
}

MagneticField field_of(const json& f)
{
    const std::string type = f.at("type").get<std::string>();
    if (type == "vortex_field")
        return make_vortex_field(vec_of(f, "center", Vec3::Zero()), vec_of(f, "axis", Vec3::UnitZ()),
                                 f.at("width").get<double>(), f.at("amp").get<double>());
    if (type == "toroidal_bump")
        return make_toroidal_bump_field(vec_of(f, "center", Vec3::Zero()),
                                        vec_of(f, "axis", Vec3::UnitZ()), f.at("major").get<double>(),
                                        f.at("tube").get<double>(), f.at("amp").get<double>());
    throw Error(ErrorKind::Config, "unknown field type '" + type + "'");
}

}  // namespace

SceneConfig parse_config(const json& j)
{
    try {
        SceneConfig c;
        if (j.contains("obstacle")) {
            const json& o = j.at("obstacle");
            for (const auto& b : get_or(o, "balls", json::array()))
                c.balls.push_back(Ball{vec_of(b, "center", Vec3::Zero()), b.at("radius").get<double>()});
            for (const auto& t : get_or(o, "tori", json::array()))
                c.tori.push_back(Torus{vec_of(t, "center", Vec3::Zero()), vec_of(t, "axis", Vec3::UnitZ()),
                                       t.at("major").get<double>(), t.at("minor").get<double>()});
            c.collar = get_or(o, "collar", -1.0);
        }
        for (const auto& p : get_or(j, "potentials", json::array())) {
            if (!p.contains("type")) throw Error(ErrorKind::Config, "potential without 'type'");
            const std::string t = p.at("type").get<std::string>();
            if (!kMagnetic.count(t) && !kElectric.count(t))
                throw Error(ErrorKind::Config, "unknown potential type '" + t + "'");
            c.potentials.push_back(p);
        }
        c.mass = get_or(j, "mass", 0.5);
        if (!(c.mass > 0.0)) throw Error(ErrorKind::Config, "mass must be positive");
        if (j.contains("flags")) {
            const json& f = j.at("flags");
            if (f.contains("A0_zero")) c.a0_zero = f.at("A0_zero").get<bool>();
            if (f.contains("B_zero")) c.b_zero = f.at("B_zero").get<bool>();
        }
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            SolverBlock b;
            b.grid = get_or(s, "grid", b.grid);
            b.extent = get_or(s, "extent", b.extent);
            b.T = get_or(s, "T", b.T);
            b.dt = get_or(s, "dt", b.dt);
            b.v_over_m = get_or(s, "v_over_m", b.v_over_m);
            b.sigma = get_or(s, "sigma", b.sigma);
            b.offset = get_or(s, "offset", b.offset);
            b.escape_tol = get_or(s, "escape_tol", b.escape_tol);
            b.p3 = get_or(s, "p3", b.p3);
            b.barrier = get_or(s, "barrier", b.barrier);
            if (s.contains("slope_band")) {
                auto band = s.at("slope_band").get<std::vector<double>>();
                if (band.size() != 2) throw Error(ErrorKind::Config, "slope_band needs two numbers");
                b.slope_lo = band[0];
                b.slope_hi = band[1];
            }
            b.check_resolution = get_or(s, "check_resolution", b.check_resolution);
            b.measure_minus = get_or(s, "measure_minus", b.measure_minus);
            if (b.barrier != "smooth" && b.barrier != "hard" && b.barrier != "none")
                throw Error(ErrorKind::Config, "barrier must be smooth, hard or none");
            c.solver = b;
        }
        if (j.contains("dataset")) {
            const json& d = j.at("dataset");
            DatasetBlock& b = c.dataset;
            b.nu = vec_of(d, "nu", b.nu);
            b.offsets = get_or(d, "offsets", b.offsets);
            b.spacing = get_or(d, "spacing", b.spacing);
            if (d.contains("plane")) {
                const json& p = d.at("plane");
                b.plane_center = vec_of(p, "center", b.plane_center);
                b.plane_b1 = vec_of(p, "b1", b.plane_b1);
                b.plane_b2 = vec_of(p, "b2", b.plane_b2);
            }
            b.angles = get_or(d, "angles", b.angles);
            b.sino_offsets = get_or(d, "sino_offsets", b.sino_offsets);
            b.sino_half_width = get_or(d, "sino_half_width", b.sino_half_width);
            b.tile = get_or(d, "tile", b.tile);
            b.tile_half_width = get_or(d, "tile_half_width", b.tile_half_width);
            b.dtheta = get_or(d, "dtheta", b.dtheta);
            b.products = get_or(d, "products", b.products);
            if (!(b.nu.norm() > 0.0)) throw Error(ErrorKind::Config, "dataset.nu is zero");
            if (b.offsets < 1) throw Error(ErrorKind::Config, "dataset.offsets must be positive");
        }
        c.output = get_or(j, "output", c.output);
        c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("bad config: ") + e.what());
    }
}

SceneConfig load_config(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::Io, "cannot open config " + path);
    json j;
    try {
        j = json::parse(f, nullptr, true, true);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, path + ": " + e.what());
    }
    return parse_config(j);
}

json to_json(const SceneConfig& c)
{
    json j;
    json o;
    o["balls"] = json::array();
    for (const auto& b : c.balls) o["balls"].push_back({{"center", vec_json(b.center)}, {"radius", b.radius}});
    o["tori"] = json::array();
    for (const auto& t : c.tori)
        o["tori"].push_back({{"center", vec_json(t.center)},
                             {"axis", vec_json(t.axis)},
                             {"major", t.major_radius},
                             {"minor", t.minor_radius}});
    o["collar"] = c.collar;
    j["obstacle"] = o;
    j["potentials"] = c.potentials;
    j["mass"] = c.mass;
    json f = json::object();
    if (c.a0_zero) f["A0_zero"] = *c.a0_zero;
    if (c.b_zero) f["B_zero"] = *c.b_zero;
    j["flags"] = f;
    if (c.solver) {
        const SolverBlock& s = *c.solver;
        j["solver"] = {{"grid", s.grid},
                       {"extent", s.extent},
                       {"T", s.T},
                       {"dt", s.dt},
                       {"v_over_m", s.v_over_m},
                       {"sigma", s.sigma},
                       {"offset", s.offset},
                       {"escape_tol", s.escape_tol},
                       {"p3", s.p3},
                       {"barrier", s.barrier},
                       {"slope_band", {s.slope_lo, s.slope_hi}},
                       {"check_resolution", s.check_resolution},
                       {"measure_minus", s.measure_minus}};
    }
    const DatasetBlock& d = c.dataset;
    j["dataset"] = {{"nu", vec_json(d.nu)},
                    {"offsets", d.offsets},
                    {"spacing", d.spacing},
                    {"plane", {{"center", vec_json(d.plane_center)},
                               {"b1", vec_json(d.plane_b1)},
                               {"b2", vec_json(d.plane_b2)}}},
                    {"angles", d.angles},
                    {"sino_offsets", d.sino_offsets},
                    {"sino_half_width", d.sino_half_width},
                    {"tile", d.tile},
                    {"tile_half_width", d.tile_half_width},
                    {"dtheta", d.dtheta},
                    {"products", d.products}};
    j["output"] = c.output;
    j["seed"] = c.seed;
    return j;
}

Scene build_scene(const SceneConfig& c)
{
    Scene s;
    s.obstacle = Obstacle(c.balls, c.tori, c.collar);
    s.mass = c.mass;
    const std::size_t nh = s.obstacle.handle_count();
    s.A = zero_potential(nh);
    s.A0 = zero_electric();
    s.B = zero_field();
    s.handle_flux.assign(nh, 0.0);
    bool has_field = false, has_electric = false;

    for (const auto& p : c.potentials) {
        try {
            const std::string type = p.at("type").get<std::string>();
            const std::string name = get_or<std::string>(p, "name", type);
            if (kElectric.count(type)) {
                ElectricPotential e;
                if (type == "gaussian_electric")
                    e = make_gaussian_electric(vec_of(p, "center", Vec3::Zero()), p.at("width").get<double>(),
                                               p.at("amp").get<double>());
                else if (type == "odd_algebraic_electric")
                    e = make_odd_algebraic_electric(
                        vec_of(p, "center", Vec3::Zero()), vec_of(p, "axis", Vec3::UnitX()),
                        p.at("width").get<double>(), p.at("amp_odd").get<double>(),
                        get_or(p, "amp_even", 0.0), p.at("zeta").get<double>(), get_or(p, "r_in", kInf),
                        get_or(p, "r_out", kInf));
                else
                    e = make_algebraic_electric(vec_of(p, "center", Vec3::Zero()), p.at("width").get<double>(),
                                                p.at("amp").get<double>(), p.at("zeta").get<double>(),
                                                get_or(p, "r_in", kInf), get_or(p, "r_out", kInf));
                has_electric = has_electric || !e.zero;
                s.electric_parts.emplace_back(name, e);
                s.A0 = s.A0 + e;
                continue;
            }
            VectorPotential a;
            if (type == "ab_torus") {
                const std::size_t h = get_or<std::size_t>(p, "handle", 0);
                if (h >= nh) throw Error(ErrorKind::Config, "ab_torus handle out of range");
                const double phi = p.at("flux").get<double>();
                a = make_ab_torus_potential(s.obstacle, h, phi);
                s.handle_flux[h] += phi;
            } else if (type == "coulomb_gauge") {
                MagneticField B = field_of(p.at("field"));
                CoulombOptions opt;
                opt.rel_tol = get_or(p, "rel_tol", opt.rel_tol);
                a = make_coulomb_potential(B, opt);
                s.fields.emplace_back(name, B);
                s.B = s.B + B;
                has_field = true;
            } else if (type == "longrange_tail") {
                SpherePolynomial f;
                for (const auto& t : p.at("lambda_inf")) {
                    if (t.size() != 4) throw Error(ErrorKind::Config, "lambda_inf terms are [coef, px, py, pz]");
                    f.terms.push_back({t[0].get<double>(), t[1].get<int>(), t[2].get<int>(), t[3].get<int>()});
                }
                a = make_longrange_potential(f, get_or(p, "r0", 2.0)).first;
            } else if (type == "vortex") {
                const Vec3 ctr = vec_of(p, "center", Vec3::Zero()), ax = vec_of(p, "axis", Vec3::UnitZ());
                const double w = p.at("width").get<double>(), amp = p.at("amp").get<double>();
                a = make_vortex_potential(ctr, ax, w, amp);
                MagneticField B = make_vortex_field(ctr, ax, w, amp);
                s.fields.emplace_back(name, B);
                s.B = s.B + B;
                has_field = true;
            } else if (type == "gaussian_gauge") {
                a = make_gaussian_gauge(vec_of(p, "center", Vec3::Zero()), p.at("width").get<double>(),
                                        p.at("amp").get<double>())
                        .first;
            }
            if (p.contains("decay")) a.decay = parse_decay(p.at("decay").get<std::string>());
            s.magnetic_parts.emplace_back(name, a);
            s.A = s.A + a;
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Config, std::string("bad potential entry: ") + e.what());
        }
    }

    if (c.a0_zero && *c.a0_zero && has_electric)
        throw Error(ErrorKind::Config, "flags.A0_zero is set but the scene has an electric potential");
    if (c.b_zero && *c.b_zero && has_field)
        throw Error(ErrorKind::Config, "flags.B_zero is set but the scene has a magnetic field");
    s.flags.a0_zero = c.a0_zero.value_or(!has_electric);
    s.flags.b_zero = c.b_zero.value_or(!has_field);
    return s;
}

}  // namespace kgs
