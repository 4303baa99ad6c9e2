#include "kgscatter/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <fstream>
#include <ostream>

#include "kgscatter/errors.hpp"
#include "kgscatter/lineflux.hpp"
#include "kgscatter/quadrature.hpp"

namespace kgs {

PhaseSource scene_phase_source(const VectorPotential& A, const ElectricPotential& A0, double tol)
{
    return [A, A0, tol](const Line& l) { return hm_phase(A, A0, LineQuery{l, {}}, tol); };
}

std::vector<double> unwrap_phases(const std::vector<double>& wrapped, int nx, int ny,
                                  int seed_index, double max_jump)
{
    const int N = nx * ny;
    if (static_cast<int>(wrapped.size()) != N || seed_index < 0 || seed_index >= N)
        throw Error(ErrorKind::InvalidArgument, "phase grid size mismatch");
    std::vector<double> out(N);
    std::vector<char> seen(N, 0);
    std::deque<int> q;
    out[seed_index] = wrap_centered(wrapped[seed_index], kTwoPi);
    seen[seed_index] = 1;
    q.push_back(seed_index);
    while (!q.empty()) {
        const int p = q.front();
        q.pop_front();
        const int i = p / ny, j = p % ny;
        const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
        for (const auto& c : nb) {
            if (c[0] < 0 || c[0] >= nx || c[1] < 0 || c[1] >= ny) continue;
            const int k = c[0] * ny + c[1];
            if (seen[k]) continue;
            out[k] = out[p] + wrap_centered(wrapped[k] - out[p], kTwoPi);
            seen[k] = 1;
            q.push_back(k);
        }
    }
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const int p = i * ny + j;
            if (i + 1 < nx && std::abs(out[p + ny] - out[p]) > max_jump)
                throw Error(ErrorKind::UnwrapAmbiguity, "adjacent phases differ by more than the jump limit");
            if (j + 1 < ny && std::abs(out[p + 1] - out[p]) > max_jump)
                throw Error(ErrorKind::UnwrapAmbiguity, "adjacent phases differ by more than the jump limit");
        }
    return out;
}

PhaseDataset unwrap_dataset(const PhaseDataset& d, const std::vector<double>* weights,
                            double max_jump)
{
    const int N = d.nx * d.ny;
    int seed = (d.nx / 2) * d.ny + d.ny / 2;
    if (weights) {
        if (static_cast<int>(weights->size()) != N)
            throw Error(ErrorKind::InvalidArgument, "weight grid size mismatch");
        seed = static_cast<int>(std::max_element(weights->begin(), weights->end()) - weights->begin());
    }
    std::vector<double> tp(N), tm(N);
    for (int k = 0; k < N; ++k) {
        tp[k] = d.phases[k].theta_plus;
        tm[k] = d.phases[k].theta_minus;
    }
    tp = unwrap_phases(tp, d.nx, d.ny, seed, max_jump);
    tm = unwrap_phases(tm, d.nx, d.ny, seed, max_jump);
    PhaseDataset out = d;
    for (int k = 0; k < N; ++k) {
        out.phases[k].theta_plus = tp[k];
        out.phases[k].theta_minus = tm[k];
    }
    return out;
}

DecoupledData decouple(const PhaseDataset& d, double max_jump)
{
    const int N = d.nx * d.ny;
    if (static_cast<int>(d.phases.size()) != N)
        throw Error(ErrorKind::InvalidArgument, "phase grid size mismatch");
    auto jump = [&](int a, int b) {
        return std::max(std::abs(d.phases[a].theta_plus - d.phases[b].theta_plus),
                        std::abs(d.phases[a].theta_minus - d.phases[b].theta_minus));
    };
    for (int i = 0; i < d.nx; ++i)
        for (int j = 0; j < d.ny; ++j) {
            const int p = i * d.ny + j;
            if ((i + 1 < d.nx && jump(p, p + d.ny) > max_jump) ||
                (j + 1 < d.ny && jump(p, p + 1) > max_jump))
                throw Error(ErrorKind::UnwrapAmbiguity, "phase grid is not continuous");
        }
    DecoupledData out;
    out.int_A.resize(N);
    out.int_A0.resize(N);
    for (int k = 0; k < N; ++k) {
        out.int_A[k] = d.phases[k].int_A();
        out.int_A0[k] = d.phases[k].int_A0();
    }
    return out;
}

// ---------------------------------------------------------------------------

Line PlaneFrame::line(double phi, double s) const
{
    const double c = std::cos(phi), sn = std::sin(phi);
    return Line{center + s * (-sn * b1 + c * b2), c * b1 + sn * b2};
}

void check_plane(const Obstacle* obs, const PlaneFrame& f, const SinogramSpec& spec)
{
    if (!obs || obs->empty()) return;
    if (!lambda_rec_check(*obs, f.center, f.normal()))
        throw Error(ErrorKind::PlaneBlocked, "obstacle meets the reconstruction plane");
    for (int k = 0; k < spec.n_angles; ++k)
        for (int j = 0; j < spec.n_offsets; j += 8)
            if (obs->line_distance(f.line(spec.angle(k), spec.offset(j))) <= obs->collar())
                throw Error(ErrorKind::PlaneBlocked, "a sampled line meets the obstacle");
}

Sinogram sample_sinogram(const LineFunctional& F, const PlaneFrame& f, const SinogramSpec& spec)
{
    Sinogram s;
    s.frame = f;
    s.spec = spec;
    const long K = spec.n_angles, J = spec.n_offsets;
    s.data.assign(K * J, 0.0);
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 8)
    for (long idx = 0; idx < K * J; ++idx) {
        try {
            s.data[idx] = F(f.line(spec.angle(idx / J), spec.offset(idx % J)));
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return s;
}

namespace {

double sinc(double x)
{
    if (std::abs(x) < 1e-12) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

}  // namespace

std::vector<double> ramp_filter(const Sinogram& s, double band_limit)
{
    const int K = s.spec.n_angles, J = s.spec.n_offsets;
    const double ds = s.spec.ds();
    const double W = band_limit / (2.0 * ds);
    std::vector<double> h(2 * J - 1);
    for (int n = -(J - 1); n <= J - 1; ++n) {
        const double x = n * ds;
        h[n + J - 1] = 2.0 * W * W * sinc(2.0 * W * x) - W * W * sinc(W * x) * sinc(W * x);
    }
    std::vector<double> out(static_cast<std::size_t>(K) * J, 0.0);
#pragma omp parallel for
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < J; ++j) {
            double acc = 0.0;
            for (int i = 0; i < J; ++i) acc += s.at(k, i) * h[j - i + J - 1];
            out[static_cast<std::size_t>(k) * J + j] = acc * ds;
        }
    return out;
}

namespace {

double backproject_point(const Sinogram& s, const std::vector<double>& q, double a, double b)
{
    const int K = s.spec.n_angles, J = s.spec.n_offsets;
    const double ds = s.spec.ds(), w = s.spec.half_width;
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
        const double phi = s.spec.angle(k);
        const double t = -a * std::sin(phi) + b * std::cos(phi);
        const double u = (t + w) / ds;
        const int i = static_cast<int>(std::floor(u));
        if (i < 0 || i >= J - 1) continue;
        const double f = u - i;
        const double* row = q.data() + static_cast<std::size_t>(k) * J;
        acc += (1.0 - f) * row[i] + f * row[i + 1];
    }
    return acc * kPi / K;
}

}  // namespace

std::vector<double> backproject(const Sinogram& s, const std::vector<double>& filtered,
                                const std::vector<std::pair<double, double>>& pts)
{
    std::vector<double> out(pts.size());
    const long n = static_cast<long>(pts.size());
#pragma omp parallel for schedule(static)
    for (long p = 0; p < n; ++p) out[p] = backproject_point(s, filtered, pts[p].first, pts[p].second);
    return out;
}

std::vector<double> backproject_serial(const Sinogram& s, const std::vector<double>& filtered,
                                       const std::vector<std::pair<double, double>>& pts)
{
    std::vector<double> out(pts.size());
    for (std::size_t p = 0; p < pts.size(); ++p)
        out[p] = backproject_point(s, filtered, pts[p].first, pts[p].second);
    return out;
}

std::vector<double> fbp(const Sinogram& s, const std::vector<std::pair<double, double>>& pts,
                        double band_limit)
{
    return backproject(s, ramp_filter(s, band_limit), pts);
}

std::vector<std::pair<double, double>> ReconstructionGrid::plane_points() const
{
    std::vector<std::pair<double, double>> pts;
    pts.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) pts.emplace_back(coord(i), coord(j));
    return pts;
}

ReconstructionGrid reconstruct_A0(const PhaseSource& data, const PlaneFrame& plane,
                                  const A0Options& opt)
{
    if (opt.spec.n_angles < 16)
        throw Error(ErrorKind::InsufficientAngles, "need at least 16 directions");
    check_plane(opt.obstacle, plane, opt.spec);
    auto sino = sample_sinogram([&](const Line& l) { return data(l).int_A0(); }, plane, opt.spec);
    ReconstructionGrid g;
    g.frame = plane;
    g.n = opt.tile;
    g.half_width = opt.tile_half_width;
    g.values = fbp(sino, g.plane_points(), opt.band_limit);
    return g;
}

double reconstruct_A0_at(const PhaseSource& data, const Vec3& y, const Vec3& normal,
                         const A0Options& opt)
{
    PlaneFrame f;
    f.center = y;
    const Vec3 n = normal.normalized();
    f.b1 = any_perpendicular(n);
    f.b2 = n.cross(f.b1);
    if (opt.spec.n_angles < 16)
        throw Error(ErrorKind::InsufficientAngles, "need at least 16 directions");
    check_plane(opt.obstacle, f, opt.spec);
    auto sino = sample_sinogram([&](const Line& l) { return data(l).int_A0(); }, f, opt.spec);
    return fbp(sino, {{0.0, 0.0}}, opt.band_limit).front();
}

std::vector<double> reconstruct_B_normal(const PhaseSource& data, const PlaneFrame& plane,
                                         const std::vector<std::pair<double, double>>& pts,
                                         const BOptions& opt)
{
    if (opt.spec.n_angles < 32)
        throw Error(ErrorKind::MomentInversionIllposed, "need at least 32 directions");
    check_plane(opt.obstacle, plane, opt.spec);
    Sinogram g = sample_sinogram([&](const Line& l) { return data(l).int_A(); }, plane, opt.spec);
    // Offset derivative of the magnetic line data is minus the X-ray transform of B . normal.
    Sinogram d = g;
    const int K = opt.spec.n_angles, J = opt.spec.n_offsets;
    const double ds = opt.spec.ds();
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < J; ++j) {
            double v;
            if (j == 0) v = (g.at(k, 1) - g.at(k, 0)) / ds;
            else if (j == J - 1) v = (g.at(k, J - 1) - g.at(k, J - 2)) / ds;
            else v = (g.at(k, j + 1) - g.at(k, j - 1)) / (2.0 * ds);
            d.data[static_cast<std::size_t>(k) * J + j] = -v;
        }
    return fbp(d, pts, opt.band_limit);
}

ReconstructionGrid reconstruct_B(const PhaseSource& data, const PlaneFrame& plane,
                                 const BOptions& opt)
{
    ReconstructionGrid g;
    g.frame = plane;
    g.n = opt.tile;
    g.half_width = opt.tile_half_width;
    g.ncomp = 3;
    const int n = g.n;
    g.values.assign(static_cast<std::size_t>(n) * n * 3, 0.0);
    const Vec3 N = plane.normal();
    // Normal component on the tile plane itself.
    auto bn = reconstruct_B_normal(data, plane, g.plane_points(), opt);
    for (int p = 0; p < n * n; ++p) g.values[3 * p + 2] = bn[p];
    // b1 component: one plane per column, spanned by (b2, N).
    for (int i = 0; i < n; ++i) {
        PlaneFrame f{plane.point(g.coord(i), 0.0), plane.b2, N};
        std::vector<std::pair<double, double>> pts;
        for (int j = 0; j < n; ++j) pts.emplace_back(g.coord(j), 0.0);
        auto v = reconstruct_B_normal(data, f, pts, opt);
        for (int j = 0; j < n; ++j) g.values[3 * (i * n + j) + 0] = v[j];
    }
    // b2 component: one plane per row, spanned by (N, b1).
    for (int j = 0; j < n; ++j) {
        PlaneFrame f{plane.point(0.0, g.coord(j)), N, plane.b1};
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i < n; ++i) pts.emplace_back(0.0, g.coord(i));
        auto v = reconstruct_B_normal(data, f, pts, opt);
        for (int i = 0; i < n; ++i) g.values[3 * (i * n + j) + 1] = v[i];
    }
    return g;
}

double reconstructed_divergence_ratio(const PhaseSource& data, const PlaneFrame& plane,
                                      const ReconstructionGrid& B, const BOptions& opt)
{
    const int n = B.n;
    const double h = B.coord(1) - B.coord(0);
    const Vec3 N = plane.normal();
    PlaneFrame up = plane, down = plane;
    up.center += h * N;
    down.center -= h * N;
    auto pts = B.plane_points();
    auto bu = reconstruct_B_normal(data, up, pts, opt);
    auto bd = reconstruct_B_normal(data, down, pts, opt);
    double sdiv = 0.0, sscale = 0.0;
    for (int i = 1; i + 1 < n; ++i)
        for (int j = 1; j + 1 < n; ++j) {
            const int p = i * n + j;
            const double d1 = (B.values[3 * (p + n)] - B.values[3 * (p - n)]) / (2.0 * h);
            const double d2 = (B.values[3 * (p + 1) + 1] - B.values[3 * (p - 1) + 1]) / (2.0 * h);
            const double d3 = (bu[p] - bd[p]) / (2.0 * h);
            sdiv += (d1 + d2 + d3) * (d1 + d2 + d3);
            sscale += d1 * d1 + d2 * d2 + d3 * d3;
        }
    return std::sqrt(sdiv / std::max(sscale, 1e-300));
}

// ---------------------------------------------------------------------------

FluxModResult recover_flux_mod(const PhasePair& c1, const PhasePair& c2, const SceneFlags& flags,
                               FluxModulus mode)
{
    if (mode == FluxModulus::Auto) mode = (flags.a0_zero && flags.b_zero) ? FluxModulus::TwoPi : FluxModulus::Pi;
    if (mode == FluxModulus::TwoPi && !(flags.a0_zero && flags.b_zero))
        throw Error(ErrorKind::ModeMismatch,
                    "fluxes modulo 2pi need a scene with zero electric potential and zero field");
    FluxModResult r;
    if (mode == FluxModulus::TwoPi) {
        r.modulus = kTwoPi;
        r.value = wrap_positive(c1.theta_plus - c2.theta_plus, kTwoPi);
    } else {
        r.modulus = kPi;
        r.value = wrap_positive(c1.int_A() - c2.int_A(), kPi);
    }
    if (r.modulus - r.value < 1e-12 * r.modulus) r.value = 0.0;
    return r;
}

double half_disk_flux(const VecField& B, const Vec3& x, const Vec3& v_in, const Vec3& vp_in,
                      double s, double tol)
{
    const Vec3 v = v_in.normalized();
    const Vec3 vp = (vp_in - vp_in.dot(v) * v).normalized();
    const Vec3 n = v.cross(vp);
    auto radial = [&](double r) {
        auto ang = [&](double t) { return B(x + r * (std::cos(t) * v + std::sin(t) * vp)).dot(n); };
        return r * integrate(ang, 0.0, kPi, 0.1 * tol / std::max(1.0, s)).value;
    };
    return integrate(radial, 0.0, s, tol).value;
}

namespace {

bool half_plane_clear(const Obstacle& obs, const Vec3& x, const Vec3& v, const Vec3& vp)
{
    const double R = 2.0 * (obs.bounding_radius() + x.norm()) + 1.0;
    for (int i = 0; i <= 96; ++i)
        for (int k = 0; k <= 96; ++k) {
            const double a = -R + 2.0 * R * i / 96.0, b = R * k / 96.0;
            if (obs.distance(x + a * v + b * vp) <= 0.0) return false;
        }
    return true;
}

}  // namespace

PhiLResult recover_Phi_L(const PhasePair& data, const SceneFlags& flags, const PhiLOptions& opt)
{
    PhiLResult r;
    r.modulus = flags.a0_zero ? kTwoPi : kPi;
    double line = data.int_A();
    double corr = 0.0;
    if (!flags.b_zero) {
        if (!opt.B) throw Error(ErrorKind::InvalidArgument, "field correction needs B");
        const Vec3 x = data.query.line.base;
        const Vec3 v = data.query.line.dir.normalized();
        Vec3 vp = opt.vperp ? Vec3(*opt.vperp) : any_perpendicular(v);
        vp = (vp - vp.dot(v) * v).normalized();
        if (opt.obstacle && !opt.obstacle->empty()) {
            const Vec3 w = v.cross(vp);
            bool found = false;
            for (const Vec3& c : {vp, Vec3(-vp), w, Vec3(-w)}) {
                if (half_plane_clear(*opt.obstacle, x, v, c)) {
                    vp = c;
                    found = true;
                    break;
                }
            }
            if (!found) throw Error(ErrorKind::PlaneBlocked, "no obstacle-free half plane for the correction");
        }
        double prev = half_disk_flux(*opt.B, x, v, vp, opt.s0, opt.tol);
        bool ok = false;
        double s = opt.s0;
        for (int k = 0; k < opt.max_doublings; ++k) {
            s *= 2.0;
            const double cur = half_disk_flux(*opt.B, x, v, vp, s, opt.tol);
            if (std::abs(cur - prev) < 10.0 * opt.tol) {
                corr = cur;
                ok = true;
                break;
            }
            prev = cur;
        }
        if (!ok) throw Error(ErrorKind::BCorrectionNonConvergent, "field flux through the half disk did not settle");
    }
    r.raw = line - corr;
    r.reduced = wrap_centered(r.raw, r.modulus);
    return r;
}

Vec3 recover_Ainf_sum(const PhaseSource& data, const Vec3& x, const Vec3& v_in,
                      const AinfOptions& opt)
{
    const Vec3 v = v_in.normalized();
    const Vec3 e1 = any_perpendicular(v), e2 = v.cross(e1);
    auto F = [&](const Line& l) { return data(l).int_A(); };
    Vec3 out = Vec3::Zero();
    for (const Vec3& e : {e1, e2}) {
        double d = angular_derivative_xray(F, x, v, e, opt.dtheta, opt.obstacle).richardson;
        if (opt.B) d -= moment_integral(*opt.B, x, v, e, opt.length_scale);
        out += d * e;
    }
    return out;
}

// ---------------------------------------------------------------------------

void write_grid_csv(std::ostream& os, const ReconstructionGrid& g,
                    const std::vector<std::string>& names)
{
    os << "x,y";
    for (int c = 0; c < g.ncomp; ++c) os << ',' << (c < static_cast<int>(names.size()) ? names[c] : "c" + std::to_string(c));
    os << '\n';
    char buf[64];
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", g.coord(i), g.coord(j));
            os << buf;
            for (int c = 0; c < g.ncomp; ++c) {
                std::snprintf(buf, sizeof buf, ",%.17g", g.values[static_cast<std::size_t>(i * g.n + j) * g.ncomp + c]);
                os << buf;
            }
            os << '\n';
        }
}

void write_grid_binary(const std::string& path, const ReconstructionGrid& g)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
    const char magic[4] = {'K', 'G', 'W', '1'};
    std::uint32_t nx = g.n, ny = g.n, nc = g.ncomp;
    const double dx = g.coord(1) - g.coord(0), dy = dx;
    f.write(magic, 4);
    f.write(reinterpret_cast<const char*>(&nx), 4);
    f.write(reinterpret_cast<const char*>(&ny), 4);
    f.write(reinterpret_cast<const char*>(&nc), 4);
    f.write(reinterpret_cast<const char*>(&dx), 8);
    f.write(reinterpret_cast<const char*>(&dy), 8);
    for (int c = 0; c < g.ncomp; ++c)
        for (int p = 0; p < g.n * g.n; ++p) {
            float re = static_cast<float>(g.values[static_cast<std::size_t>(p) * g.ncomp + c]), im = 0.0f;
            f.write(reinterpret_cast<const char*>(&re), 4);
            f.write(reinterpret_cast<const char*>(&im), 4);
        }
}

void write_error_summary(std::ostream& os, const ErrorSummary& s)
{
    char buf[64];
    for (const auto& [k, v] : s.entries) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << k << '=' << buf << '\n';
    }
}

double relative_l2(const ReconstructionGrid& g, int c, const std::function<double(const Vec3&)>& ref)
{
    double num = 0.0, den = 0.0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            const double r = ref(g.point(i, j));
            const double d = g.values[static_cast<std::size_t>(i * g.n + j) * g.ncomp + c] - r;
            num += d * d;
            den += r * r;
        }
    return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace kgs
