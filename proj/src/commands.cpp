#include "kgscatter/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "kgscatter/errors.hpp"
#include "kgscatter/hm_scattering.hpp"
#include "kgscatter/lineflux.hpp"

namespace kgs {

namespace fs = std::filesystem;

namespace {

std::ostream& log_of(const CommandOptions& o) { return o.log ? *o.log : std::cout; }

std::string out_dir(const SceneConfig& c, const CommandOptions& o)
{
    const std::string d = o.out.empty() ? c.output : o.out;
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec || !fs::is_directory(d)) throw Error(ErrorKind::Io, "cannot create output directory " + d);
    return d;
}

std::uint64_t seed_of(const SceneConfig& c, const CommandOptions& o) { return o.seed.value_or(c.seed); }

std::ofstream open_out(const fs::path& p)
{
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + p.string());
    return f;
}

std::string num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x + 0.0);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int col(const std::string& name) const
    {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return static_cast<int>(k);
        throw Error(ErrorKind::Io, "missing column " + name);
    }
};

Csv read_csv(const fs::path& p)
{
    std::ifstream f(p);
    if (!f) throw Error(ErrorKind::Io, "cannot read " + p.string());
    Csv c;
    std::string line;
    if (!std::getline(f, line)) throw Error(ErrorKind::Io, p.string() + " is empty");
    c.header = split(line, ',');
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto r = split(line, ',');
        if (r.size() != c.header.size()) throw Error(ErrorKind::Io, "ragged row in " + p.string());
        c.rows.push_back(std::move(r));
    }
    return c;
}

double to_d(const std::string& s)
{
    try {
        return std::stod(s);
    } catch (...) {
        throw Error(ErrorKind::Io, "bad number '" + s + "'");
    }
}

HomologyLabel parse_label(const std::string& s)
{
    HomologyLabel h;
    if (s.empty()) return h;
    for (const auto& t : split(s, ';')) h.push_back(static_cast<int>(to_d(t)));
    return h;
}

BarrierMode barrier_of(const std::string& s)
{
    if (s == "hard") return BarrierMode::Hard;
    if (s == "none") return BarrierMode::None;
    return BarrierMode::Smooth;
}

PlaneFrame plane_of(const DatasetBlock& d)
{
    PlaneFrame f;
    f.center = d.plane_center;
    f.b1 = d.plane_b1.normalized();
    f.b2 = (d.plane_b2 - d.plane_b2.dot(f.b1) * f.b1).normalized();
    return f;
}

HomologyLabel unit_label(std::size_t n, std::size_t j)
{
    HomologyLabel h(n, 0);
    h[j] = 1;
    return h;
}

double wrapped_distance(double a, double b, double modulus)
{
    double d = std::fmod(a - b, modulus);
    if (d < 0) d += modulus;
    return std::min(d, modulus - d);
}

}  // namespace

std::string label_string(const HomologyLabel& h)
{
    std::string s;
    for (std::size_t k = 0; k < h.size(); ++k) {
        if (k) s += ';';
        s += std::to_string(h[k]);
    }
    return s;
}

std::vector<PhaseRow> read_phase_table(const std::string& path)
{
    Csv c = read_csv(path);
    const int ci = c.col("i"), cj = c.col("j"), c1 = c.col("s1"), c2 = c.col("s2"), cx = c.col("x"),
              cy = c.col("y"), cz = c.col("z"), cl = c.col("label"), cp = c.col("theta_plus"),
              cm = c.col("theta_minus");
    std::vector<PhaseRow> out;
    for (const auto& r : c.rows) {
        PhaseRow p;
        p.i = static_cast<int>(to_d(r[ci]));
        p.j = static_cast<int>(to_d(r[cj]));
        p.s1 = to_d(r[c1]);
        p.s2 = to_d(r[c2]);
        p.base = Vec3(to_d(r[cx]), to_d(r[cy]), to_d(r[cz]));
        p.label = parse_label(r[cl]);
        p.theta_plus = to_d(r[cp]);
        p.theta_minus = to_d(r[cm]);
        out.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------

int cmd_validate(const SceneConfig& cfg, const CommandOptions& opt)
{
    std::ostream& os = log_of(opt);
    const std::uint64_t seed = seed_of(cfg, opt);
    Scene s;
    try {
        s = build_scene(cfg);
    } catch (const Error& e) {
        os << "FAIL scene: " << e.what() << '\n';
        return 1;
    }
    os << "PASS geometry: " << cfg.balls.size() << " balls, " << cfg.tori.size() << " tori\n";
    bool all = true;
    auto report = [&](const std::string& what, const ClassReport& r) {
        all = all && r.ok;
        os << (r.ok ? "PASS " : "FAIL ") << what << '\n';
        for (const auto& m : r.messages) os << "  " << m << '\n';
    };
    auto guarded = [&](const std::string& what, const std::function<ClassReport()>& f) {
        try {
            report(what, f());
        } catch (const Error& e) {
            all = false;
            os << "FAIL " << what << ": " << e.what() << '\n';
        }
    };
    for (const auto& [name, a] : s.magnetic_parts)
        guarded("vector potential " + name + " (" + a.decay.label() + ")",
                [&] { return validate_vector_potential(a, s.obstacle, seed); });
    for (const auto& [name, e] : s.electric_parts)
        guarded("electric potential " + name, [&] { return validate_electric(e, seed); });
    for (const auto& [name, b] : s.fields)
        guarded("magnetic field " + name, [&] { return validate_field(b, s.obstacle, seed); });
    os << (all ? "all checks passed" : "some checks failed") << '\n';
    return all ? 0 : 1;
}

// ---------------------------------------------------------------------------

int cmd_forward(const SceneConfig& cfg, const CommandOptions& opt)
{
    std::ostream& os = log_of(opt);
    const Scene s = build_scene(cfg);
    const fs::path dir = out_dir(cfg, opt);
    const DatasetBlock& d = cfg.dataset;

    TransverseGrid g;
    g.nu = d.nu.normalized();
    g.n = d.offsets;
    g.h = d.spacing;
    const Vec3 e1 = g.e1(), e2 = g.e2();

    std::vector<PhaseRow> rows;
    std::vector<LineQuery> queries;
    int skipped = 0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const Line l = g.line(i, j);
            if (!s.obstacle.empty() && s.obstacle.line_distance(l) <= 0.0) {
                ++skipped;
                continue;
            }
            PhaseRow r;
            r.i = i;
            r.j = j;
            r.base = l.base;
            r.s1 = (l.base - g.origin).dot(e1);
            r.s2 = (l.base - g.origin).dot(e2);
            queries.push_back(make_query(s.obstacle, l));
            r.label = queries.back().label;
            rows.push_back(r);
        }
    const std::vector<PhasePair> ph = hm_phase_batch(s.A, s.A0, queries, opt.tol);

    {
        std::ofstream f = open_out(dir / "phases.csv");
        f << "i,j,s1,s2,x,y,z,label,theta_plus,theta_minus,int_A,int_A0\n";
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const PhaseRow& r = rows[k];
            f << r.i << ',' << r.j << ',' << num(r.s1) << ',' << num(r.s2) << ',' << num(r.base.x()) << ','
              << num(r.base.y()) << ',' << num(r.base.z()) << ',' << label_string(r.label) << ','
              << num(ph[k].theta_plus) << ',' << num(ph[k].theta_minus) << ',' << num(ph[k].int_A()) << ','
              << num(ph[k].int_A0()) << '\n';
        }
    }
    os << "phases.csv: " << rows.size() << " lines, " << skipped << " skipped (meet the obstacle)\n";

    const bool want_flux =
        std::find(d.products.begin(), d.products.end(), "flux") != d.products.end();
    if (want_flux && s.flags.b_zero) {
        std::ofstream f = open_out(dir / "flux.csv");
        f << "label,vx,vy,vz,F_h,Phi_L\n";
        HoleFluxOptions ho;
        ho.seed = seed_of(cfg, opt);
        const std::size_t nh = s.obstacle.handle_count();
        std::vector<HomologyLabel> labels{HomologyLabel(nh, 0)};
        for (std::size_t j = 0; j < nh; ++j) labels.push_back(unit_label(nh, j));
        for (const auto& h : labels) {
            const FluxRecord r = flux_record(s.A, s.obstacle, h, g.nu, ho);
            f << label_string(h) << ',' << num(g.nu.x()) << ',' << num(g.nu.y()) << ',' << num(g.nu.z()) << ','
              << num(r.F_h) << ',' << num(r.Phi_L) << '\n';
        }
        os << "flux.csv: " << labels.size() << " classes\n";
    } else if (want_flux) {
        os << "flux.csv skipped: hole fluxes need a field-free scene\n";
    }

    std::ofstream f = open_out(dir / "config.json");
    f << to_json(cfg).dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_verify(const SceneConfig& cfg, const CommandOptions& opt)
{
    std::ostream& os = log_of(opt);
    if (!cfg.solver) throw Error(ErrorKind::Config, "verify needs a solver block");
    const SolverBlock& b = *cfg.solver;
    const Scene s = build_scene(cfg);
    const fs::path dir = out_dir(cfg, opt);

    SolverScene sc;
    if (!s.A0.zero) sc.a0 = s.A0.eval;
    if (!s.A.zero) sc.a = s.A.eval;
    if (!s.obstacle.empty()) {
        const Obstacle obs = s.obstacle;
        sc.obstacle_distance = [obs](const Vec3& x) { return obs.distance(x); };
    }
    sc.mass = s.mass;
    sc.p3 = b.p3;

    SolverOptions so;
    so.grid.n = b.grid;
    so.grid.extent = b.extent;
    so.T = b.T;
    so.dt = b.dt;
    so.barrier = barrier_of(b.barrier);
    so.escape_tol = b.escape_tol;

    const VectorPotential A = s.A;
    const ElectricPotential A0 = s.A0;
    const double tol = opt.tol;
    LinePhaseFn phases = [A, A0, tol](const Vec3& x, const Vec3& nu) {
        const PhasePair p = hm_phase(A, A0, LineQuery{Line{x, nu}, {}}, tol);
        return std::make_pair(p.theta_plus, p.theta_minus);
    };
    MeasurementSetup su;
    su.center = Vec3(0.0, b.offset, 0.0);
    su.sigma = b.sigma;
    su.measure_minus = b.measure_minus;

    std::vector<double> vs;
    for (double r : b.v_over_m) vs.push_back(r * s.mass);
    SolverRun run = convergence_study(sc, so, phases, su, vs);

    {
        std::ofstream f = open_out(dir / "verify.csv");
        f << "v,v_over_m,theta_plus_measured,theta_plus_predicted,theta_minus_measured,"
             "theta_minus_predicted,abs_err,overlap_mag\n";
        for (const auto& r : run.rows)
            f << num(r.v) << ',' << num(r.v / s.mass) << ',' << num(r.theta_plus_measured) << ','
              << num(r.theta_plus_predicted) << ',' << num(r.theta_minus_measured) << ','
              << num(r.theta_minus_predicted) << ',' << num(r.abs_err) << ',' << num(r.overlap_mag) << '\n';
    }

    ErrorSummary sum;
    sum.add("slope", run.slope);
    sum.add("slope_ci_lo", run.slope_lo);
    sum.add("slope_ci_hi", run.slope_hi);
    sum.add("degenerate", run.degenerate ? 1.0 : 0.0);

    int code = 0;
    if (run.degenerate) {
        os << "degenerate fit: phase errors are at the noise floor, no decay rate to report\n";
    } else {
        char buf[160];
        std::snprintf(buf, sizeof buf, "slope %.4f (95%% CI %.4f .. %.4f), band [%.2f, %.2f]\n", run.slope,
                      run.slope_lo, run.slope_hi, b.slope_lo, b.slope_hi);
        os << buf;
        if (run.slope < b.slope_lo || run.slope > b.slope_hi) {
            os << "FAIL slope outside the configured band\n";
            code = 1;
        }
    }

    if (b.check_resolution && !run.rows.empty()) {
        SolverOptions fine = so;
        fine.grid.n = 2 * so.grid.n;
        KGSolver solver(sc, fine);
        double worst = 0.0;
        for (const auto& coarse : run.rows) {
            const PhaseMeasurement m = scattering_phase_measurement(solver, phases, su, coarse.v);
            const double change = std::abs(m.theta_plus_measured - coarse.theta_plus_measured);
            const double ratio = change / std::max(coarse.abs_err, 1e-300);
            worst = std::max(worst, ratio);
            if (!(ratio < 0.1))
                os << "warning: discretization dominates at v=" << num(coarse.v)
                   << ": doubling the grid moves the phase by " << num(change) << ", " << num(ratio)
                   << " of the v-error\n";
        }
        sum.add("resolution_ratio", worst);
        os << "resolution check: doubling the grid changes the phases by at most " << num(worst)
           << " of the v-error\n";
    }

    std::ofstream f = open_out(dir / "verify_summary.txt");
    write_error_summary(f, sum);
    return code;
}

// ---------------------------------------------------------------------------

int cmd_invert(const SceneConfig& cfg, const CommandOptions& opt)
{
    std::ostream& os = log_of(opt);
    const DatasetBlock& d = cfg.dataset;
    for (const auto& p : d.products) {
        if (p == "Ainf")
            throw Error(ErrorKind::InvalidArgument,
                        "A_inf alone is not determined by the scattering data; only the sum "
                        "A_inf(v) + A_inf(-v) is recoverable, request the product \"Ainf_sum\"");
        if (p != "A0" && p != "B" && p != "Ainf_sum" && p != "flux" && p != "Phi_L")
            throw Error(ErrorKind::Config, "unknown product '" + p + "'");
    }
    auto wants = [&](const char* p) { return std::find(d.products.begin(), d.products.end(), p) != d.products.end(); };

    const Scene s = build_scene(cfg);
    const fs::path dir = out_dir(cfg, opt);
    const PhaseSource src = scene_phase_source(s.A, s.A0, opt.tol);
    const PlaneFrame plane = plane_of(d);
    const Obstacle* obs = s.obstacle.empty() ? nullptr : &s.obstacle;
    const Vec3 nu = d.nu.normalized();
    SinogramSpec spec;
    spec.n_angles = d.angles;
    spec.n_offsets = d.sino_offsets;
    spec.half_width = d.sino_half_width;
    ErrorSummary sum;

    if (wants("A0")) {
        A0Options o;
        o.spec = spec;
        o.tile = d.tile;
        o.tile_half_width = d.tile_half_width;
        o.obstacle = obs;
        const ReconstructionGrid g = reconstruct_A0(src, plane, o);
        std::ofstream f = open_out(dir / "recon_A0.csv");
        write_grid_csv(f, g, {"A0"});
        if (!s.A0.zero) {
            sum.add("A0_rel_l2", relative_l2(g, 0, [&](const Vec3& x) { return s.A0(x); }));
        } else {
            double mx = 0.0;
            for (double v : g.values) mx = std::max(mx, std::abs(v));
            sum.add("A0_max_abs", mx);
        }
        os << "recon_A0.csv: " << g.n << "x" << g.n << " tile\n";
    }

    if (wants("B")) {
        BOptions o;
        o.spec = spec;
        o.tile = d.tile;
        o.tile_half_width = d.tile_half_width;
        o.obstacle = obs;
        const ReconstructionGrid g = reconstruct_B(src, plane, o);
        std::ofstream f = open_out(dir / "recon_B.csv");
        write_grid_csv(f, g, {"B1", "B2", "Bn"});
        const Vec3 axes[3] = {plane.b1, plane.b2, plane.normal()};
        const char* names[3] = {"B1_rel_l2", "B2_rel_l2", "Bn_rel_l2"};
        if (!s.flags.b_zero && !s.fields.empty()) {
            for (int c = 0; c < 3; ++c) {
                double ref_norm = 0.0;
                for (int i = 0; i < g.n; ++i)
                    for (int j = 0; j < g.n; ++j) ref_norm = std::max(ref_norm, std::abs(s.B(g.point(i, j)).dot(axes[c])));
                if (ref_norm > 0.0) sum.add(names[c], relative_l2(g, c, [&](const Vec3& x) { return s.B(x).dot(axes[c]); }));
            }
        }
        sum.add("B_divergence_ratio", reconstructed_divergence_ratio(src, plane, g, o));
        os << "recon_B.csv: " << g.n << "x" << g.n << " tile, 3 components\n";
    }

    if (wants("Ainf_sum")) {
        AinfOptions o;
        o.dtheta = d.dtheta;
        o.obstacle = obs;
        if (!s.flags.b_zero) o.B = VecField(s.B.eval);
        const Vec3 r = recover_Ainf_sum(src, plane.center, nu, o);
        sum.add("Ainf_sum_x", r.x());
        sum.add("Ainf_sum_y", r.y());
        sum.add("Ainf_sum_z", r.z());
        Vec3 truth = Vec3::Zero();
        if (s.A.a_inf) truth = (*s.A.a_inf)(nu) + (*s.A.a_inf)(-nu);
        sum.add("Ainf_sum_err", (r - truth).norm());
        os << "A_inf sum along nu: " << num(r.x()) << ' ' << num(r.y()) << ' ' << num(r.z()) << '\n';
    }

    if (wants("flux") || wants("Phi_L")) {
        const fs::path table = dir / "phases.csv";
        if (!fs::exists(table)) throw Error(ErrorKind::Io, table.string() + " missing; run forward first");
        const std::vector<PhaseRow> rows = read_phase_table(table.string());
        const std::size_t nh = s.obstacle.handle_count();
        auto pair_of = [&](const PhaseRow& r) {
            PhasePair p;
            p.theta_plus = r.theta_plus;
            p.theta_minus = r.theta_minus;
            p.query = LineQuery{Line{r.base, nu}, r.label};
            return p;
        };
        auto first_of = [&](const HomologyLabel& h) -> const PhaseRow* {
            for (const auto& r : rows)
                if (r.label == h) return &r;
            return nullptr;
        };
        std::ofstream f = open_out(dir / "flux_report.csv");
        f << "quantity,value,modulus,truth,error\n";
        const PhaseRow* base = first_of(HomologyLabel(nh, 0));

        if (wants("flux")) {
            for (std::size_t j = 0; j < nh; ++j) {
                const PhaseRow* r = first_of(unit_label(nh, j));
                if (!r || !base) {
                    os << "flux of handle " << j << ": table has no lines of both classes\n";
                    continue;
                }
                const FluxModResult m = recover_flux_mod(pair_of(*r), pair_of(*base), s.flags);
                const double truth = std::fmod(std::fmod(s.handle_flux[j], m.modulus) + m.modulus, m.modulus);
                const double err = wrapped_distance(m.value, truth, m.modulus);
                const std::string k = "F_h" + std::to_string(j);
                f << k << ',' << num(m.value) << ',' << num(m.modulus) << ',' << num(truth) << ',' << num(err) << '\n';
                sum.add(k + "_err", err);
                os << k << " = " << num(m.value) << " mod " << num(m.modulus) << '\n';
            }
        }

        if (wants("Phi_L")) {
            PhiLOptions o;
            o.obstacle = obs;
            o.tol = 1e-8;
            if (!s.flags.b_zero) o.B = VecField(s.B.eval);
            std::optional<PhiLResult> res;
            for (const auto& r : rows) {
                if (r.label != HomologyLabel(nh, 0)) continue;
                try {
                    res = recover_Phi_L(pair_of(r), s.flags, o);
                    break;
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::PlaneBlocked) throw;
                }
            }
            if (!res) throw Error(ErrorKind::PlaneBlocked, "no line of the trivial class admits the correction");
            double truth = 0.0;
            if (s.A.lambda_inf)
                truth = (*s.A.lambda_inf)(nu) - (*s.A.lambda_inf)(-nu);
            else if (s.A.a_inf)
                truth = long_range_flux_from_ainf(*s.A.a_inf, nu, any_perpendicular(nu));
            const double err = wrapped_distance(res->raw, truth, res->modulus);
            f << "Phi_L," << num(res->reduced) << ',' << num(res->modulus) << ',' << num(truth) << ',' << num(err)
              << '\n';
            sum.add("Phi_L_err", err);
            os << "Phi_L = " << num(res->reduced) << " mod " << num(res->modulus) << '\n';
        }
    }

    std::ofstream f = open_out(dir / "errors.txt");
    write_error_summary(f, sum);
    write_error_summary(os, sum);
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_export_plots(const std::string& out, const CommandOptions& opt)
{
    std::ostream& os = log_of(opt);
    const fs::path dir(out);
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "no output directory " + out);
    const fs::path pd = dir / "plots";
    int written = 0;
    auto ensure = [&] {
        std::error_code ec;
        fs::create_directories(pd, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create " + pd.string());
    };

    if (fs::exists(dir / "phases.csv")) {
        ensure();
        const Csv c = read_csv(dir / "phases.csv");
        const int c1 = c.col("s1"), c2 = c.col("s2"), cl = c.col("label");
        std::ofstream f = open_out(pd / "phase_series.csv");
        f << "s1,s2,label,quantity,value\n";
        for (const char* q : {"theta_plus", "theta_minus"}) {
            const int cq = c.col(q);
            for (const auto& r : c.rows) f << r[c1] << ',' << r[c2] << ',' << r[cl] << ',' << q << ',' << r[cq] << '\n';
        }
        ++written;
    }
    if (fs::exists(dir / "verify.csv")) {
        ensure();
        const Csv c = read_csv(dir / "verify.csv");
        const int cv = c.col("v"), ce = c.col("abs_err");
        std::ofstream f = open_out(pd / "convergence.csv");
        f << "log_v,log_err\n";
        for (const auto& r : c.rows) {
            const double e = to_d(r[ce]);
            if (e > 0.0) f << num(std::log(to_d(r[cv]))) << ',' << num(std::log(e)) << '\n';
        }
        ++written;
    }
    for (const char* name : {"recon_A0", "recon_B"}) {
        const fs::path p = dir / (std::string(name) + ".csv");
        if (!fs::exists(p)) continue;
        ensure();
        const Csv c = read_csv(p);
        const int cx = c.col("x"), cy = c.col("y");
        std::ofstream f = open_out(pd / (std::string(name) + "_triples.csv"));
        f << "x,y,quantity,value\n";
        for (std::size_t k = 0; k < c.header.size(); ++k) {
            if (static_cast<int>(k) == cx || static_cast<int>(k) == cy) continue;
            for (const auto& r : c.rows) f << r[cx] << ',' << r[cy] << ',' << c.header[k] << ',' << r[k] << '\n';
        }
        ++written;
    }
    if (!written)
        throw Error(ErrorKind::Io, "nothing to export in " + out + " (expected phases.csv, verify.csv or recon_*.csv)");
    os << "wrote " << written << " plot tables to " << pd.string() << '\n';
    return 0;
}

}  // namespace kgs
