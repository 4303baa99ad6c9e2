#include "kgscatter/potentials.hpp"

#include <boost/math/special_functions/ellint_1.hpp>
#include <boost/math/special_functions/ellint_2.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "kgscatter/errors.hpp"
#include "kgscatter/quadrature.hpp"

namespace kgs {

std::string DecayClass::label() const
{
    std::ostringstream os;
    switch (kind) {
    case DecayKind::ShortRange: os << "SR(" << zeta << ")"; break;
    case DecayKind::LongRange: os << "LR"; break;
    case DecayKind::LongRangeDelta: os << "LRdelta(" << delta << ")"; break;
    }
    return os.str();
}

VectorPotential zero_potential(std::size_t n_handles)
{
    VectorPotential a;
    a.eval = [](const Vec3&) { return Vec3::Zero().eval(); };
    a.decay = DecayClass::short_range(kInf);
    a.flux.assign(n_handles, 0.0);
    a.a_inf = [](const Vec3&) { return Vec3::Zero().eval(); };
    a.lambda_inf = [](const Vec3&) { return 0.0; };
    return a;
}

ElectricPotential zero_electric()
{
    ElectricPotential e;
    e.eval = [](const Vec3&) { return 0.0; };
    return e;
}

MagneticField zero_field()
{
    MagneticField b;
    b.eval = [](const Vec3&) { return Vec3::Zero().eval(); };
    b.support_radius = 0.0;
    return b;
}

namespace {

DecayClass combine(const DecayClass& a, const DecayClass& b)
{
    using K = DecayKind;
    if (a.kind == K::ShortRange && b.kind == K::ShortRange)
        return DecayClass::short_range(std::min(a.zeta, b.zeta));
    if (a.kind == K::LongRange || b.kind == K::LongRange) return DecayClass::long_range();
    double d = 1e300;
    if (a.kind == K::LongRangeDelta) d = std::min(d, a.delta);
    if (b.kind == K::LongRangeDelta) d = std::min(d, b.delta);
    if (a.kind == K::ShortRange) d = std::min(d, a.zeta);
    if (b.kind == K::ShortRange) d = std::min(d, b.zeta);
    return DecayClass::long_range_delta(d);
}

// Angular data is known for short-range potentials (zero) or when supplied.
std::optional<VecField> ainf_of(const VectorPotential& a)
{
    if (a.zero || a.decay.kind == DecayKind::ShortRange)
        return VecField([](const Vec3&) { return Vec3::Zero().eval(); });
    return a.a_inf;
}

std::optional<ScalarField> lambda_of(const VectorPotential& a)
{
    if (a.zero) return ScalarField([](const Vec3&) { return 0.0; });
    return a.lambda_inf;
}

// Smooth transition S(u): 0 for u <= 0, 1 for u >= 1.
double smooth_unit(double u)
{
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
    return a / (a + b);
}

double smooth_unit_derivative(double u)
{
    if (u <= 0.0 || u >= 1.0) return 0.0;
    double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
    double da = a / (u * u), db = -b / ((1.0 - u) * (1.0 - u));
    return (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
}

}  // namespace

VectorPotential operator+(const VectorPotential& a, const VectorPotential& b)
{
    if (a.zero && b.flux.size() >= a.flux.size()) return b;
    if (b.zero && a.flux.size() >= b.flux.size()) {
        VectorPotential r = a;
        return r;
    }
    VectorPotential r;
    r.zero = a.zero && b.zero;
    auto ea = a.eval, eb = b.eval;
    bool za = a.zero, zb = b.zero;
    r.eval = [ea, eb, za, zb](const Vec3& x) {
        Vec3 s = Vec3::Zero();
        if (!za) s += ea(x);
        if (!zb) s += eb(x);
        return s;
    };
    if (a.field || b.field) {
        auto fa = a.field, fb = b.field;
        r.field = [fa, fb](const Vec3& x) {
            Vec3 s = Vec3::Zero();
            if (fa) s += fa(x);
            if (fb) s += fb(x);
            return s;
        };
    }
    r.decay = combine(a.decay, b.decay);
    r.flux.assign(std::max(a.flux.size(), b.flux.size()), 0.0);
    for (std::size_t i = 0; i < a.flux.size(); ++i) r.flux[i] += a.flux[i];
    for (std::size_t i = 0; i < b.flux.size(); ++i) r.flux[i] += b.flux[i];
    auto ia = ainf_of(a), ib = ainf_of(b);
    if (ia && ib) {
        auto fa = *ia, fb = *ib;
        r.a_inf = [fa, fb](const Vec3& v) { return (fa(v) + fb(v)).eval(); };
    }
    auto la = lambda_of(a), lb = lambda_of(b);
    if (la && lb) {
        auto fa = *la, fb = *lb;
        r.lambda_inf = [fa, fb](const Vec3& v) { return fa(v) + fb(v); };
    }
    r.length_scale = std::max(a.length_scale, b.length_scale);
    r.name = a.name + "+" + b.name;
    return r;
}

ElectricPotential operator+(const ElectricPotential& a, const ElectricPotential& b)
{
    if (a.zero) return b;
    if (b.zero) return a;
    ElectricPotential r;
    r.zero = false;
    auto ea = a.eval, eb = b.eval;
    r.eval = [ea, eb](const Vec3& x) { return ea(x) + eb(x); };
    r.zeta = std::min(a.zeta, b.zeta);
    r.length_scale = std::max(a.length_scale, b.length_scale);
    r.center = 0.5 * (a.center + b.center);
    r.name = a.name + "+" + b.name;
    return r;
}

MagneticField operator+(const MagneticField& a, const MagneticField& b)
{
    if (a.zero) return b;
    if (b.zero) return a;
    MagneticField r;
    r.zero = false;
    auto ea = a.eval, eb = b.eval;
    r.eval = [ea, eb](const Vec3& x) { return (ea(x) + eb(x)).eval(); };
    r.mu = std::min(a.mu, b.mu);
    // Smallest ball about the origin-free midpoint containing both supports.
    Vec3 c = 0.5 * (a.support_center + b.support_center);
    r.support_center = c;
    r.support_radius = std::max((a.support_center - c).norm() + a.support_radius,
                                (b.support_center - c).norm() + b.support_radius);
    r.length_scale = std::min(a.length_scale, b.length_scale);
    r.name = a.name + "+" + b.name;
    return r;
}

VectorPotential scaled(const VectorPotential& a, double s)
{
    if (a.zero) return a;
    VectorPotential r = a;
    auto e = a.eval;
    r.eval = [e, s](const Vec3& x) { return (s * e(x)).eval(); };
    if (a.field) {
        auto f = a.field;
        r.field = [f, s](const Vec3& x) { return (s * f(x)).eval(); };
    }
    for (auto& f : r.flux) f *= s;
    if (a.a_inf) {
        auto f = *a.a_inf;
        r.a_inf = [f, s](const Vec3& v) { return (s * f(v)).eval(); };
    }
    if (a.lambda_inf) {
        auto f = *a.lambda_inf;
        r.lambda_inf = [f, s](const Vec3& v) { return s * f(v); };
    }
    return r;
}

double iota(double a, double b, double r)
{
    if (a < 0.0 || b < 0.0 || !(a + b > 2.0))
        throw Error(ErrorKind::DomainError, "iota needs a, b >= 0 and a + b > 2");
    const double q = 1.0 + std::abs(r);
    if (a == 2.0 || b == 2.0) return 1.0 / (q * q) + std::log(std::exp(1.0) + std::abs(r)) / std::pow(q, a + b - 2.0);
    return 1.0 / std::pow(q, std::min(a, b)) + 1.0 / std::pow(q, a + b - 2.0);
}

// ---------------------------------------------------------------------------

double SpherePolynomial::value(const Vec3& w) const
{
    double s = 0.0;
    for (const auto& t : terms)
        s += t.coef * std::pow(w.x(), t.px) * std::pow(w.y(), t.py) * std::pow(w.z(), t.pz);
    return s;
}

Vec3 SpherePolynomial::gradient(const Vec3& w) const
{
    Vec3 g = Vec3::Zero();
    auto pw = [](double x, int p) { return p <= 0 ? 1.0 : std::pow(x, p); };
    for (const auto& t : terms) {
        if (t.px > 0) g.x() += t.coef * t.px * pw(w.x(), t.px - 1) * pw(w.y(), t.py) * pw(w.z(), t.pz);
        if (t.py > 0) g.y() += t.coef * t.py * pw(w.x(), t.px) * pw(w.y(), t.py - 1) * pw(w.z(), t.pz);
        if (t.pz > 0) g.z() += t.coef * t.pz * pw(w.x(), t.px) * pw(w.y(), t.py) * pw(w.z(), t.pz - 1);
    }
    return g;
}

Vec3 SpherePolynomial::tangential_gradient(const Vec3& w) const
{
    const Vec3 n = w.normalized();
    Vec3 g = gradient(n);
    return g - g.dot(n) * n;
}

double smooth_step(double r, double r0) { return smooth_unit((r - r0) / r0); }
double smooth_step_derivative(double r, double r0) { return smooth_unit_derivative((r - r0) / r0) / r0; }

// ---------------------------------------------------------------------------
// Solid-angle (Aharonov-Bohm) potential of a torus hole.

double disk_solid_angle(const Torus& t, const Vec3& x, double tol)
{
    const Vec3 a = t.axis.normalized();
    const Vec3 r = x - t.center;
    const double z = r.dot(a);
    const double rho = (r - z * a).norm();
    const double R = t.major_radius;
    double dist = rho <= R ? std::abs(z) : std::hypot(rho - R, z);
    if (dist < 1e-9) throw Error(ErrorKind::EvaluationTooCloseToDisk, "point on the spanning disk");
    // Radial part done in closed form; the azimuthal integral numerically.
    auto f = [&](double phi) {
        double c = rho * std::cos(phi);
        double s2 = z * z + rho * rho - c * c;
        auto F = [&](double u) {
            double q = std::sqrt(u * u + s2);
            return -1.0 / q + c * u / (s2 * q);
        };
        return z * (F(R - c) - F(-c));
    };
    return integrate(f, 0.0, kTwoPi, tol).value;
}

namespace {

// Biot-Savart kernel of a unit counterclockwise loop, without the mu0/4pi factor.
Vec3 loop_kernel(const Vec3& center, const Vec3& axis, double R, const Vec3& x)
{
    const Vec3 r = x - center;
    const double z = r.dot(axis);
    const Vec3 rv = r - z * axis;
    const double rho = rv.norm();
    const double ap2 = (R + rho) * (R + rho) + z * z;
    const double am2 = (R - rho) * (R - rho) + z * z;
    const double k2 = 4.0 * R * rho / ap2;
    const double sq = std::sqrt(ap2);
    double gz, grho;
    if (k2 < 1e-8) {
        const double d2 = R * R + z * z;
        gz = 2.0 * kPi * R * R / (d2 * std::sqrt(d2));
        grho = 3.0 * kPi * R * R * z * rho / (d2 * d2 * std::sqrt(d2));
    } else {
        const double k = std::sqrt(k2);
        const double K = boost::math::ellint_1(k);
        const double E = boost::math::ellint_2(k);
        gz = 2.0 / sq * (K + (R * R - rho * rho - z * z) / am2 * E);
        grho = 2.0 * z / (rho * sq) * (-K + (R * R + rho * rho + z * z) / am2 * E);
    }
    Vec3 out = gz * axis;
    if (rho > 0.0) out += grho * (rv / rho);
    return out;
}

}  // namespace

VectorPotential make_ab_torus_potential(const Obstacle& obs, std::size_t handle, double flux)
{
    if (handle >= obs.handle_count())
        throw Error(ErrorKind::InvalidArgument, "no torus with index " + std::to_string(handle));
    VectorPotential A = zero_potential(obs.handle_count());
    A.name = "ab_torus";
    A.decay = DecayClass::short_range(2.0);
    const Torus t = obs.tori()[handle];
    A.length_scale = t.major_radius + t.center.norm();
    if (flux == 0.0) return A;
    A.zero = false;
    A.flux[handle] = flux;
    const Vec3 c = t.center, ax = t.axis.normalized();
    const double R = t.major_radius;
    const double s = flux / (4.0 * kPi);
    A.eval = [=](const Vec3& x) { return (s * loop_kernel(c, ax, R, x)).eval(); };
    return A;
}

// ---------------------------------------------------------------------------
// Coulomb gauge by ray integrals: A(x) = (1/4 pi) int_{S^2} w x (int_0^inf B(x + r w) dr) dw.

namespace {

// Volume rule over the support on Gauss-Legendre cells. The kernel is split smoothly at
// radius rho; the inner part is done in spherical coordinates around x, which absorbs the
// 1/r^2 singularity, and the outer part sees only a smooth kernel.
struct CoulombQuad {
    MagneticField B;
    double h = 1.0, rho = 0.5;
    int p = 4;
    std::vector<Vec3> cells;
    std::vector<Vec3> node_y, node_wb;  // level-0 nodes, p^3 per cell
    std::vector<double> gx, gw;  // per-cell rule
    std::vector<double> bx, bw;  // near-ball rule, p + 4 nodes

    double far_weight(double r) const { return smooth_unit((r - 0.5 * rho) / (0.5 * rho)); }

    void find_cells(double cell_scale)
    {
        const Vec3 c = B.support_center;
        const double Rs = B.support_radius;
        h = std::min(cell_scale * B.length_scale, 0.5 * Rs);
        if (2.0 * Rs / h > 40.0) h = 2.0 * Rs / 40.0;
        rho = 2.0 * h;
        const int m = static_cast<int>(std::ceil(2.0 * Rs / h));
        const double lo = -0.5 * m * h;
        const int ns = 6;
        std::vector<std::pair<Vec3, double>> peak;
        double bmax = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                for (int k = 0; k < m; ++k) {
                    const Vec3 cc = c + Vec3(lo + (i + 0.5) * h, lo + (j + 0.5) * h, lo + (k + 0.5) * h);
                    if ((cc - c).norm() > Rs + h) continue;
                    double best = 0.0;
                    for (int a = 0; a < ns; ++a)
                        for (int b = 0; b < ns; ++b)
                            for (int d = 0; d < ns; ++d) {
                                const Vec3 off = Vec3(a, b, d) * (1.2 * h / (ns - 1)) - Vec3::Constant(0.6 * h);
                                best = std::max(best, B.eval(cc + off).norm());
                            }
                    peak.emplace_back(cc, best);
                    bmax = std::max(bmax, best);
                }
        for (const auto& [cc, v] : peak)
            if (v > 1e-13 * bmax) cells.push_back(cc);
    }

    void build(int order)
    {
        p = order;
        auto q = gauss_legendre(p);
        gx = q.first;
        gw = q.second;
        auto qb = gauss_legendre(p + 4);
        bx = qb.first;
        bw = qb.second;
        node_y.clear();
        node_wb.clear();
        node_y.reserve(cells.size() * p * p * p);
        node_wb.reserve(cells.size() * p * p * p);
        for (const auto& cc : cells)
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j)
                    for (int k = 0; k < p; ++k) {
                        const Vec3 y = cc + 0.5 * h * Vec3(gx[i], gx[j], gx[k]);
                        const double w = gw[i] * gw[j] * gw[k] * 0.125 * h * h * h;
                        node_y.push_back(y);
                        node_wb.push_back(w * B.eval(y));
                    }
    }

    Vec3 near_ball(const Vec3& x) const
    {
        const int n = p + 4;
        const Vec3 e1 = Vec3::UnitX(), e2 = Vec3::UnitY(), e3 = Vec3::UnitZ();
        Vec3 total = Vec3::Zero();
        for (int iu = 0; iu < n; ++iu) {
            const double u = bx[iu];
            const double sn = std::sqrt(std::max(0.0, 1.0 - u * u));
            for (int ip = 0; ip < 2 * n; ++ip) {
                const double phi = kTwoPi * (ip + 0.5) / (2 * n);
                const Vec3 w = u * e3 + sn * (std::cos(phi) * e1 + std::sin(phi) * e2);
                Vec3 J = Vec3::Zero();
                for (int half = 0; half < 2; ++half) {
                    const double r0 = 0.5 * rho * half, len = 0.5 * rho;
                    for (int ir = 0; ir < n; ++ir) {
                        const double r = r0 + 0.5 * len * (bx[ir] + 1.0);
                        const double wt = 0.5 * len * bw[ir] * (1.0 - far_weight(r));
                        if (wt != 0.0) J += wt * B.eval(x + r * w);
                    }
                }
                total += (bw[iu] * (kTwoPi / (2 * n))) * w.cross(J);
            }
        }
        return total;
    }

    Vec3 eval(const Vec3& x) const
    {
        const int p3 = p * p * p;
        const double reach = 0.87 * h + rho;
        Vec3 total = Vec3::Zero();
        bool near = false;
        for (std::size_t ci = 0; ci < cells.size(); ++ci) {
            const double dist = (x - cells[ci]).norm();
            if (dist < reach) near = true;
            if (dist > rho + 0.87 * h) {
                const std::size_t base = ci * p3;
                for (int k = 0; k < p3; ++k) {
                    const Vec3 d = x - node_y[base + k];
                    const double r2 = d.squaredNorm();
                    total += node_wb[base + k].cross(d) / (r2 * std::sqrt(r2));
                }
            } else if (dist + 0.87 * h > 0.5 * rho) {
                // Cell overlaps the transition shell: weight each node.
                const std::size_t base = ci * p3;
                for (int k = 0; k < p3; ++k) {
                    const Vec3 d = x - node_y[base + k];
                    const double r = d.norm();
                    const double fw = far_weight(r);
                    if (fw != 0.0) total += (fw / (r * r * r)) * node_wb[base + k].cross(d);
                }
            }
        }
        if (near) total += near_ball(x);
        return total / (4.0 * kPi);
    }
};

}  // namespace

VectorPotential make_coulomb_potential(const MagneticField& B, const CoulombOptions& opt)
{
    VectorPotential A = zero_potential();
    A.name = "coulomb_gauge";
    if (B.zero) return A;
    if (!std::isfinite(B.support_radius) || B.support_radius <= 0.0)
        throw Error(ErrorKind::InvalidArgument, "Coulomb gauge needs a compactly supported field");
    const Vec3 c = B.support_center;
    const double Rs = B.support_radius;
    // Calibrate cell size and order on probe points inside, near and outside the support;
    // keep the cheapest settled rule.
    const Vec3 u1 = Vec3(0.36, 0.48, 0.8).normalized(), u2 = Vec3(-0.6, 0.64, -0.48).normalized();
    const std::vector<Vec3> probes = {c + 0.05 * Rs * u2, c + 0.4 * Rs * u1, c + 0.8 * Rs * u2,
                                      c + 1.3 * Rs * u1, c + 3.0 * Rs * u2};
    std::shared_ptr<CoulombQuad> chosen;
    std::size_t best_cost = std::numeric_limits<std::size_t>::max();
    for (double cs : opt.cell_scales) {
        auto proto = std::make_shared<CoulombQuad>();
        proto->B = B;
        proto->find_cells(cs);
        if (proto->cells.empty()) return A;
        std::vector<Vec3> prev;
        for (int order : opt.schedule) {
            const std::size_t cost = proto->cells.size() * order * order * order;
            if (cost >= best_cost) break;
            auto q = std::make_shared<CoulombQuad>(*proto);
            q->build(order);
            std::vector<Vec3> cur;
            double scale = 0.0;
            for (const auto& pt : probes) {
                cur.push_back(q->eval(pt));
                scale = std::max(scale, cur.back().norm());
            }
            if (!prev.empty()) {
                double diff = 0.0;
                for (std::size_t k = 0; k < cur.size(); ++k) diff = std::max(diff, (cur[k] - prev[k]).norm());
                if (diff <= opt.rel_tol * std::max(scale, 1e-300)) {
                    chosen = q;
                    best_cost = cost;
                    break;
                }
            }
            prev = std::move(cur);
        }
    }
    if (!chosen)
        throw Error(ErrorKind::QuadratureNonConvergent,
                    "Coulomb-gauge quadrature did not settle within the order schedule");
    A.zero = false;
    A.eval = [chosen](const Vec3& x) { return chosen->eval(x); };
    auto Bf = B;
    A.field = [Bf](const Vec3& x) { return Bf.eval(x); };
    A.decay = DecayClass::short_range(2.0);
    A.length_scale = Rs + c.norm();
    return A;
}

// ---------------------------------------------------------------------------

std::pair<VectorPotential, GaugeFunction> make_longrange_potential(const SpherePolynomial& f,
                                                                   double r0)
{
    if (!(r0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "cutoff radius must be positive");
    VectorPotential A = zero_potential();
    A.name = "longrange_tail";
    A.zero = f.terms.empty();
    A.decay = DecayClass::long_range_delta(2.0);
    A.length_scale = 2.0 * r0;
    auto fp = std::make_shared<SpherePolynomial>(f);
    A.eval = [fp, r0](const Vec3& x) {
        const double r = x.norm();
        if (r <= r0) return Vec3::Zero().eval();
        const Vec3 w = x / r;
        const double chi = smooth_step(r, r0), dchi = smooth_step_derivative(r, r0);
        Vec3 out = Vec3::Zero();
        if (dchi != 0.0) out += dchi * fp->value(w) * w;
        if (chi != 0.0) out += (chi / r) * fp->tangential_gradient(w);
        return out;
    };
    A.a_inf = [fp](const Vec3& v) {
        const double n = v.norm();
        return (fp->tangential_gradient(v / n) / n).eval();
    };
    A.lambda_inf = [fp](const Vec3& v) { return fp->value(v.normalized()); };
    GaugeFunction g;
    g.eval = [fp, r0](const Vec3& x) {
        const double r = x.norm();
        if (r <= r0) return 0.0;
        return smooth_step(r, r0) * fp->value(x / r);
    };
    g.lambda_inf = *A.lambda_inf;
    return {A, g};
}

std::pair<VectorPotential, GaugeFunction> make_gaussian_gauge(const Vec3& center, double width,
                                                              double amp)
{
    VectorPotential A = zero_potential();
    A.name = "gaussian_gauge";
    A.zero = amp == 0.0;
    A.decay = DecayClass::short_range(4.0);
    A.length_scale = width + center.norm();
    const double w2 = width * width;
    A.eval = [=](const Vec3& x) {
        const Vec3 r = x - center;
        return (-2.0 * amp / w2 * std::exp(-r.squaredNorm() / w2) * r).eval();
    };
    GaugeFunction g;
    g.eval = [=](const Vec3& x) { return amp * std::exp(-(x - center).squaredNorm() / w2); };
    g.lambda_inf = [](const Vec3&) { return 0.0; };
    return {A, g};
}

VectorPotential make_vortex_potential(const Vec3& center, const Vec3& axis, double width, double a0)
{
    VectorPotential A = zero_potential();
    A.name = "vortex";
    A.zero = a0 == 0.0;
    A.decay = DecayClass::short_range(4.0);
    A.length_scale = width + center.norm();
    const Vec3 n = axis.normalized();
    const double s2 = width * width;
    A.eval = [=](const Vec3& x) {
        const Vec3 r = x - center;
        return (a0 * std::exp(-r.squaredNorm() / (2.0 * s2)) * n.cross(r)).eval();
    };
    MagneticField B = make_vortex_field(center, axis, width, a0);
    A.field = B.eval;
    return A;
}

MagneticField make_vortex_field(const Vec3& center, const Vec3& axis, double width, double a0)
{
    MagneticField B;
    B.name = "vortex";
    B.zero = a0 == 0.0;
    const Vec3 n = axis.normalized();
    const double s2 = width * width;
    B.eval = [=](const Vec3& x) {
        const Vec3 r = x - center;
        const double r2 = r.squaredNorm();
        const double g = a0 * std::exp(-r2 / (2.0 * s2));
        return (g * (2.0 * n - (r2 * n - r.dot(n) * r) / s2)).eval();
    };
    B.support_center = center;
    B.support_radius = width * std::sqrt(2.0 * 40.0);  // Gaussian below e^-40
    B.length_scale = width;
    return B;
}

MagneticField make_toroidal_bump_field(const Vec3& center, const Vec3& axis, double major,
                                       double tube, double amp)
{
    MagneticField B;
    B.name = "toroidal_bump";
    B.zero = amp == 0.0;
    const Vec3 a = axis.normalized();
    B.eval = [=](const Vec3& x) {
        const Vec3 r = x - center;
        const double z = r.dot(a);
        const Vec3 rv = r - z * a;
        const double rho = rv.norm();
        const double q = ((rho - major) * (rho - major) + z * z) / (tube * tube);
        if (q >= 1.0 || rho == 0.0) return Vec3::Zero().eval();
        const double bump = std::exp(1.0 - 1.0 / (1.0 - q));
        return (amp * bump * a.cross(rv / rho)).eval();
    };
    B.support_center = center;
    B.support_radius = major + tube;
    B.length_scale = tube;
    return B;
}

ElectricPotential make_gaussian_electric(const Vec3& center, double width, double amp)
{
    ElectricPotential e;
    e.name = "gaussian_electric";
    e.zero = amp == 0.0;
    e.zeta = 8.0;
    e.length_scale = width;
    e.center = center;
    const double w2 = width * width;
    e.eval = [=](const Vec3& x) { return amp * std::exp(-(x - center).squaredNorm() / w2); };
    return e;
}

ElectricPotential make_algebraic_electric(const Vec3& center, double width, double amp,
                                          double zeta, double r_in, double r_out)
{
    if (!(zeta > 1.0)) throw Error(ErrorKind::DomainError, "electric decay rate must exceed 1");
    ElectricPotential e;
    e.name = "algebraic_electric";
    e.zero = amp == 0.0;
    e.zeta = zeta;
    e.length_scale = width;
    e.center = center;
    const bool windowed = std::isfinite(r_in) && std::isfinite(r_out);
    if (windowed && !(r_out > r_in)) throw Error(ErrorKind::InvalidArgument, "window needs r_out > r_in");
    e.eval = [=](const Vec3& x) {
        const double r2 = (x - center).squaredNorm();
        double v = amp * std::pow(1.0 + r2 / (width * width), -0.5 * zeta);
        if (windowed) v *= 1.0 - smooth_unit((std::sqrt(r2) - r_in) / (r_out - r_in));
        return v;
    };
    return e;
}

ElectricPotential make_odd_algebraic_electric(const Vec3& center, const Vec3& axis, double width,
                                              double amp_odd, double amp_even, double zeta,
                                              double r_in, double r_out)
{
    ElectricPotential e = make_algebraic_electric(center, width, amp_even, zeta, r_in, r_out);
    const ScalarField even = e.eval;
    const Vec3 n = axis.normalized();
    const bool windowed = std::isfinite(r_in) && std::isfinite(r_out);
    e.name = "odd_algebraic_electric";
    e.zero = amp_odd == 0.0 && amp_even == 0.0;
    e.eval = [=](const Vec3& x) {
        const Vec3 r = x - center;
        const double q = 1.0 + r.squaredNorm() / (width * width);
        double v = amp_odd * (r.dot(n) / width) * std::pow(q, -0.5 * (zeta + 1.0));
        if (windowed) v *= 1.0 - smooth_unit((r.norm() - r_in) / (r_out - r_in));
        return v + even(x);
    };
    return e;
}

// ---------------------------------------------------------------------------
// Validation

Vec3 numerical_curl(const VecField& A, const Vec3& x, double h)
{
    Vec3 d[3];
    for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Zero();
        e[k] = h;
        d[k] = (A(x + e) - A(x - e)) / (2.0 * h);
    }
    return Vec3(d[1].z() - d[2].y(), d[2].x() - d[0].z(), d[0].y() - d[1].x());
}

double numerical_divergence(const VecField& F, const Vec3& x, double h)
{
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Zero();
        e[k] = h;
        s += (F(x + e)[k] - F(x - e)[k]) / (2.0 * h);
    }
    return s;
}

double circulation(const VecField& A, const Circle& c, double tol)
{
    auto f = [&](double phi) { return A(c.point(phi)).dot(c.tangent(phi)); };
    return integrate(f, 0.0, kTwoPi, tol).value;
}

double decay_slope(const std::function<double(const Vec3&)>& magnitude, const Vec3& center,
                   double r_min, double r_max, int n_rays, int n_radii, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<Vec3> rays;
    for (int i = 0; i < n_rays; ++i) rays.push_back(Vec3(nd(rng), nd(rng), nd(rng)).normalized());
    std::vector<double> lx, ly;
    for (int k = 0; k < n_radii; ++k) {
        double r = r_min * std::pow(r_max / r_min, double(k) / (n_radii - 1));
        double m = 0.0;
        for (const auto& u : rays) m = std::max(m, magnitude(center + r * u));
        if (m <= 0.0) continue;
        lx.push_back(std::log(r));
        ly.push_back(std::log(m));
    }
    if (lx.size() < 2) return -kInf;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= lx.size();
    my /= lx.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    return sxy / sxx;
}

namespace {

std::vector<Vec3> exterior_points(const Obstacle& obs, double radius, int count, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(-radius, radius);
    std::vector<Vec3> pts;
    int guard = 0;
    while (static_cast<int>(pts.size()) < count && guard++ < 100000) {
        Vec3 p(ud(rng), ud(rng), ud(rng));
        if (p.norm() > radius) continue;
        if (!obs.empty() && obs.distance(p) <= 2.0 * obs.collar()) continue;
        pts.push_back(p);
    }
    return pts;
}

}  // namespace

ClassReport validate_vector_potential(const VectorPotential& A, const Obstacle& obs,
                                      std::uint64_t seed)
{
    ClassReport rep;
    if (A.zero) return rep;
    auto fail = [&](const std::string& m) {
        rep.ok = false;
        rep.messages.push_back(m);
    };
    const double L = std::max(A.length_scale, obs.bounding_radius());
    // curl A = B at random exterior points.
    const double h = 1e-4 * std::max(1.0, L);
    for (const auto& p : exterior_points(obs, 1.5 * L + 1.0, 50, seed)) {
        Vec3 c = numerical_curl(A.eval, p, h);
        Vec3 b = A.curl(p);
        double scale = b.norm() + A(p).norm() / std::max(L, 1.0) + 1e-12;
        if ((c - b).norm() > 1e-5 * scale) {
            std::ostringstream os;
            os << "curl mismatch at (" << p.transpose() << "): |curl A - B| = " << (c - b).norm();
            fail(os.str());
            break;
        }
    }
    // Circulation over each dual curve.
    for (std::size_t j = 0; j < obs.handle_count(); ++j) {
        double phi = j < A.flux.size() ? A.flux[j] : 0.0;
        double circ = circulation(A.eval, obs.dual_curve(j));
        if (std::abs(circ - phi) > 1e-6)
            fail("circulation over handle " + std::to_string(j) + " is " + std::to_string(circ) +
                 ", flux map says " + std::to_string(phi));
    }
    // Decay.
    const double r1 = 8.0 * (L + 1.0), r2 = 64.0 * (L + 1.0);
    double slope = decay_slope([&](const Vec3& x) { return A(x).norm(); }, Vec3::Zero(), r1, r2, 6, 8, seed);
    if (A.decay.kind == DecayKind::ShortRange) {
        if (slope > -A.decay.zeta + 0.1)
            fail("decay slope " + std::to_string(slope) + " too slow for " + A.decay.label());
    } else if (slope > -1.0 + 0.1) {
        fail("decay slope " + std::to_string(slope) + " slower than 1/|x|");
    }
    if (A.decay.kind == DecayKind::LongRangeDelta && A.a_inf) {
        std::mt19937_64 rng(seed + 1);
        std::normal_distribution<double> nd;
        for (int i = 0; i < 20; ++i) {
            Vec3 v = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
            if (std::abs((*A.a_inf)(v).dot(v)) > 1e-5) {
                fail("A_inf is not tangential");
                break;
            }
        }
    }
    return rep;
}

ClassReport validate_electric(const ElectricPotential& A0, std::uint64_t seed)
{
    ClassReport rep;
    if (A0.zero) return rep;
    const double L = A0.length_scale + A0.center.norm();
    double slope = decay_slope([&](const Vec3& x) { return std::abs(A0(x)); }, A0.center,
                               8.0 * (L + 1.0), 64.0 * (L + 1.0), 6, 8, seed);
    if (std::isfinite(A0.zeta) && slope > -A0.zeta + 0.1) {
        rep.ok = false;
        rep.messages.push_back("electric decay slope " + std::to_string(slope) + " slower than -" +
                               std::to_string(A0.zeta));
    }
    return rep;
}

ClassReport validate_field(const MagneticField& B, const Obstacle& obs, std::uint64_t seed)
{
    ClassReport rep;
    if (B.zero) return rep;
    const double L = std::isfinite(B.support_radius) ? B.support_radius + B.support_center.norm()
                                                     : B.length_scale + B.support_center.norm();
    const double h = 1e-4 * std::max(1.0, B.length_scale);
    for (const auto& p : exterior_points(obs, L + 1.0, 50, seed)) {
        double div = numerical_divergence(B.eval, p, h);
        double scale = B(p).norm() / std::max(B.length_scale, 1e-12) + 1e-12;
        if (std::abs(div) > 1e-6 * std::max(scale, B(p).norm()) + 1e-9) {
            rep.ok = false;
            rep.messages.push_back("field is not divergence-free");
            break;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------

Vec3 a_infinity(const VectorPotential& A, const Vec3& v, double tau0)
{
    const Vec3 n = v.normalized();
    if (A.zero) return Vec3::Zero();
    std::vector<Vec3> samples;
    Vec3 prev_est = Vec3::Constant(kInf);
    double tau = std::max(tau0, 4.0 * A.length_scale);
    for (int k = 0; k <= 20; ++k) {
        samples.push_back(tau * A(tau * n));
        tau *= 2.0;
        if (samples.size() < 2) continue;
        // Richardson in 1/tau over the last (up to four) samples, componentwise.
        const std::size_t m = std::min<std::size_t>(samples.size(), 4);
        Vec3 est;
        for (int c = 0; c < 3; ++c) {
            std::vector<double> s;
            for (std::size_t i = samples.size() - m; i < samples.size(); ++i) s.push_back(samples[i][c]);
            est[c] = richardson(s, 2.0, 1).first;
        }
        if ((est - prev_est).norm() < 1e-6) {
            if (std::abs(est.dot(n)) > 1e-5 * std::max(1.0, est.norm()))
                throw Error(ErrorKind::ClassValidation, "A_inf has a radial component");
            return est;
        }
        prev_est = est;
    }
    throw Error(ErrorKind::NonConvergent, "tau A(tau v) did not settle");
}

double radial_component_bound(const VectorPotential& A, double r, int samples, std::uint64_t seed)
{
    if (A.zero) return 0.0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    double sup = -kInf;
    for (int i = 0; i < samples; ++i) {
        Vec3 w = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
        double rr = r * std::pow(100.0, ud(rng));
        sup = std::max(sup, A(rr * w).dot(w));
    }
    return std::max(sup, 0.0);
}

// ---------------------------------------------------------------------------

namespace {

bool segment_clear(const Obstacle& obs, const Vec3& a, const Vec3& b)
{
    if (obs.empty()) return true;
    const int n = 400;
    for (int i = 0; i <= n; ++i)
        if (obs.distance(a + (b - a) * (double(i) / n)) <= 0.5 * obs.collar()) return false;
    return true;
}

double segment_integral(const VecField& F, const Vec3& a, const Vec3& b, double tol)
{
    const Vec3 d = b - a;
    auto f = [&](double s) { return F(a + s * d).dot(d); };
    return integrate_pieces(f, graded_parameters(a, b), tol).value;
}

double path_integral(const VecField& F, const std::vector<Vec3>& pts, double tol)
{
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += segment_integral(F, pts[i], pts[i + 1], tol);
    return s;
}

// Polylines from a to b that avoid the obstacle; the second (if found) goes around a different way.
std::vector<std::vector<Vec3>> paths_between(const Obstacle& obs, const Vec3& a, const Vec3& b)
{
    std::vector<std::vector<Vec3>> out;
    if (segment_clear(obs, a, b)) out.push_back({a, b});
    const Vec3 mid = 0.5 * (a + b);
    Vec3 dir = b - a;
    if (dir.norm() < 1e-12) dir = Vec3::UnitX();
    const Vec3 p1 = any_perpendicular(dir), p2 = dir.normalized().cross(p1);
    const double base = std::max(1.0, obs.bounding_radius());
    for (double scale : {1.0, 2.0, 4.0, 8.0}) {
        for (const Vec3& p : {p1, p2, Vec3(-p1), Vec3(-p2)}) {
            Vec3 q = mid + scale * base * 1.5 * p;
            if (segment_clear(obs, a, q) && segment_clear(obs, q, b)) out.push_back({a, q, b});
            if (out.size() >= 2) return out;
        }
    }
    return out;
}

}  // namespace

GaugeFunction gauge_between(const VectorPotential& A1, const VectorPotential& A2,
                            const Obstacle& obs, const Vec3& anchor, const GaugeOptions& opt)
{
    auto e1 = A1.eval, e2 = A2.eval;
    bool z1 = A1.zero, z2 = A2.zero;
    VecField diff = [e1, e2, z1, z2](const Vec3& x) {
        Vec3 s = Vec3::Zero();
        if (!z2) s += e2(x);
        if (!z1) s -= e1(x);
        return s;
    };
    for (std::size_t j = 0; j < obs.handle_count(); ++j) {
        double c = circulation(diff, obs.dual_curve(j), 1e-11);
        if (std::abs(c) > 1e-8)
            throw Error(ErrorKind::FluxMismatch,
                        "circulation difference " + std::to_string(c) + " over handle " + std::to_string(j));
    }
    const double tol = opt.tol;
    auto lambda = [diff, obs, anchor, tol](const Vec3& x) {
        auto paths = paths_between(obs, anchor, x);
        if (paths.empty()) throw Error(ErrorKind::InvalidArgument, "no obstacle-free path to point");
        return path_integral(diff, paths.front(), tol);
    };
    // Path independence on a few probe points.
    const double R = std::max(1.0, obs.bounding_radius());
    for (const Vec3& p : {Vec3(2.0 * R, 0.3 * R, -0.4 * R), Vec3(-1.7 * R, 1.1 * R, 0.8 * R),
                          Vec3(0.2 * R, -2.2 * R, 1.3 * R)}) {
        auto paths = paths_between(obs, anchor, p);
        if (paths.size() >= 2) {
            double a = path_integral(diff, paths[0], tol), b = path_integral(diff, paths[1], tol);
            if (std::abs(a - b) > opt.path_tol)
                throw Error(ErrorKind::FluxMismatch, "gauge function depends on the path");
        }
    }
    GaugeFunction g;
    g.eval = lambda;
    const double far = opt.far_radius;
    g.lambda_inf = [lambda, far](const Vec3& v) {
        const Vec3 n = v.normalized();
        std::vector<double> s;
        for (double r : {far, 2.0 * far, 4.0 * far, 8.0 * far}) s.push_back(lambda(r * n));
        return richardson(s, 2.0, 1).first;
    };
    return g;
}

}  // namespace kgs
