#include "kgscatter/lineflux.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "kgscatter/errors.hpp"
#include "kgscatter/quadrature.hpp"

namespace kgs {

namespace {

// Base point of the line closest to c, unit direction.
Line centered(const Line& l, const Vec3& c)
{
    Line out;
    out.dir = l.dir.normalized();
    out.base = l.base + (c - l.base).dot(out.dir) * out.dir;
    return out;
}

void check_tail(const VectorPotential& A, const Line& l, double L)
{
    // r |A.v| should fall off along the line for every admissible class.
    for (double sgn : {1.0, -1.0}) {
        const double r1 = 1e4 * L, r2 = 1e5 * L;
        const double g1 = r1 * std::abs(A(l.point(sgn * r1)).dot(l.dir));
        const double g2 = r2 * std::abs(A(l.point(sgn * r2)).dot(l.dir));
        if (g1 > 1e-6 && g2 > 0.5 * g1)
            throw Error(ErrorKind::SlowDecay, "A.v is not integrable along the line");
    }
}

}  // namespace

double xray_A(const VectorPotential& A, const Line& line, double tol)
{
    if (A.zero) return 0.0;
    const Line l = centered(line, Vec3::Zero());
    const double L = std::max(0.5, A.length_scale);
    check_tail(A, l, L);
    auto f = [&](double t) { return A(l.point(t)).dot(l.dir); };
    return integrate_real_line(f, L, tol).value;
}

double xray_A0(const ElectricPotential& A0, const Line& line, double tol)
{
    if (A0.zero) return 0.0;
    const Line l = centered(line, A0.center);
    auto f = [&](double t) { return A0(l.point(t)); };
    return integrate_real_line(f, std::max(0.5, A0.length_scale), tol).value;
}

XRaySample xray(const VectorPotential& A, const ElectricPotential& A0, const LineQuery& q,
                double tol)
{
    XRaySample s;
    s.query = q;
    s.query.line.dir = q.line.dir.normalized();
    if (!A.zero) {
        const Line l = centered(q.line, Vec3::Zero());
        const double L = std::max(0.5, A.length_scale);
        check_tail(A, l, L);
        auto f = [&](double t) { return A(l.point(t)).dot(l.dir); };
        QuadResult r = integrate_real_line(f, L, 0.5 * tol);
        s.int_A = r.value;
        s.error += r.error;
    }
    if (!A0.zero) {
        const Line l = centered(q.line, A0.center);
        auto f = [&](double t) { return A0(l.point(t)); };
        QuadResult r = integrate_real_line(f, std::max(0.5, A0.length_scale), 0.5 * tol);
        s.int_A0 = r.value;
        s.error += r.error;
    }
    return s;
}

std::vector<XRaySample> xray_batch(const VectorPotential& A, const ElectricPotential& A0,
                                   const std::vector<LineQuery>& lines, double tol)
{
    std::vector<XRaySample> out(lines.size());
    const long n = static_cast<long>(lines.size());
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 4)
    for (long i = 0; i < n; ++i) {
        try {
            out[i] = xray(A, A0, lines[i], tol);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return out;
}

std::vector<XRaySample> xray_batch_serial(const VectorPotential& A, const ElectricPotential& A0,
                                          const std::vector<LineQuery>& lines, double tol)
{
    std::vector<XRaySample> out;
    out.reserve(lines.size());
    for (const auto& q : lines) out.push_back(xray(A, A0, q, tol));
    return out;
}

void write_xray_csv(std::ostream& os, const std::vector<XRaySample>& rows)
{
    std::size_t nh = 0;
    for (const auto& r : rows) nh = std::max(nh, r.query.label.size());
    os << "x1,x2,x3,v1,v2,v3";
    for (std::size_t j = 0; j < nh; ++j) os << ",h" << j + 1;
    os << ",int_A,int_A0,err\n";
    char buf[64];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        os << buf;
    };
    for (const auto& r : rows) {
        const Line& l = r.query.line;
        for (int k = 0; k < 3; ++k) {
            put(l.base[k]);
            os << ',';
        }
        for (int k = 0; k < 3; ++k) {
            put(l.dir[k]);
            os << ',';
        }
        for (std::size_t j = 0; j < nh; ++j)
            os << (j < r.query.label.size() ? r.query.label[j] : 0) << ',';
        put(r.int_A);
        os << ',';
        put(r.int_A0);
        os << ',';
        put(r.error);
        os << '\n';
    }
}

double curve_integral(const VecField& A, const ClosedCurve& c, double tol)
{
    double s = 0.0;
    const double each = tol / std::max<std::size_t>(1, c.segments().size());
    for (const auto& seg : c.segments()) {
        auto f = [&](double u) { return A(segment_point(seg, u)).dot(segment_tangent(seg, u)); };
        if (auto* st = std::get_if<StraightSegment>(&seg))
            s += integrate_pieces(f, graded_parameters(st->a, st->b), each).value;
        else
            s += integrate(f, 0.0, 1.0, each).value;
    }
    return s;
}

double half_circle_integral(const VecField& A, const Vec3& x, const Vec3& v, const Vec3& vperp,
                            double s, double tol)
{
    auto f = [&](double t) {
        const double c = std::cos(t), sn = std::sin(t);
        return A(x + s * (c * v + sn * vperp)).dot(s * (-sn * v + c * vperp));
    };
    return integrate(f, 0.0, kPi, tol).value;
}

double long_range_flux_from_ainf(const VecField& a_inf, const Vec3& v, const Vec3& vperp)
{
    auto f = [&](double t) {
        const double c = std::cos(t), sn = std::sin(t);
        return a_inf(c * v + sn * vperp).dot(-sn * v + c * vperp);
    };
    return -integrate(f, 0.0, kPi, 1e-12).value;
}

double long_range_flux(const VectorPotential& A, const Vec3& v_in, const LongRangeOptions& opt)
{
    if (A.zero) return 0.0;
    const Vec3 v = v_in.normalized();
    Vec3 vp = opt.vperp ? Vec3(*opt.vperp) : any_perpendicular(v);
    vp = (vp - vp.dot(v) * v).normalized();
    std::vector<double> sched = opt.schedule;
    if (sched.empty()) {
        const double s0 = 8.0 * (A.length_scale + opt.x.norm() + 1.0);
        for (int k = 0; k < 5; ++k) sched.push_back(s0 * std::pow(2.0, k));
    }
    if (sched.size() < 3) throw Error(ErrorKind::InvalidArgument, "need at least three radii");
    const double ratio = sched[1] / sched[0];
    for (std::size_t i = 1; i < sched.size(); ++i)
        if (!(sched[i] > sched[i - 1]) || std::abs(sched[i] / sched[i - 1] - ratio) > 1e-9 * ratio)
            throw Error(ErrorKind::InvalidArgument, "radii must increase geometrically");
    std::vector<double> vals;
    for (double s : sched) vals.push_back(-half_circle_integral(A.eval, opt.x, v, vp, s, opt.tol));
    auto [best, diff] = richardson(vals, ratio, 1);
    if (diff > std::max(opt.stall_tol, 1e-6 * std::abs(best)))
        throw Error(ErrorKind::NonConvergent,
                    "half-circle extrapolation stalled (last change " + std::to_string(diff) + ")");
    if (A.decay.kind == DecayKind::LongRangeDelta) {
        VecField ainf;
        if (A.a_inf) {
            ainf = *A.a_inf;
        } else {
            const VectorPotential Ac = A;
            ainf = [Ac](const Vec3& w) { return a_infinity(Ac, w); };
        }
        const double alt = long_range_flux_from_ainf(ainf, v, vp);
        if (std::abs(alt - best) > opt.cross_check_tol)
            throw Error(ErrorKind::NonConvergent,
                        "arc limit " + std::to_string(best) + " disagrees with A_inf integral " +
                            std::to_string(alt));
    }
    return best;
}

std::vector<Line> representative_lines(const Obstacle& obs, const HomologyLabel& h, const Vec3& v_in,
                                       int count, std::uint64_t seed, int max_tries)
{
    const Vec3 v = v_in.normalized();
    const Vec3 e1 = any_perpendicular(v), e2 = v.cross(e1);
    const Vec3 c = Vec3::Zero();
    const double rmax = 1.2 * obs.bounding_radius() + 1.0;
    // Keep clear of the surface by a fraction of the thinnest component.
    double margin = obs.collar();
    for (const auto& t : obs.tori()) margin = std::min(margin, 0.25 * t.minor_radius);
    for (const auto& b : obs.balls()) margin = std::min(margin, 0.25 * b.radius);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(-rmax, rmax);
    std::vector<Line> out;
    for (int i = 0; i < max_tries && static_cast<int>(out.size()) < count; ++i) {
        const double a = ud(rng), b = ud(rng);
        if (a * a + b * b > rmax * rmax) continue;
        Line l{c + a * e1 + b * e2, v};
        if (!obs.empty() && obs.line_distance(l) <= margin) continue;
        if (crossing_label(obs, l) != h) continue;
        if (classify_line(obs, l) != h) continue;
        out.push_back(l);
    }
    return out;
}

double hole_flux(const VectorPotential& A, const Obstacle& obs, const HomologyLabel& h,
                 const Vec3& v, const HoleFluxOptions& opt)
{
    if (h.size() != obs.handle_count())
        throw Error(ErrorKind::InvalidArgument, "label length differs from handle count");
    auto reps = representative_lines(obs, h, v, opt.representatives, opt.seed, opt.max_tries);
    if (static_cast<int>(reps.size()) < opt.representatives)
        throw Error(ErrorKind::NoRepresentative, "no line of the requested class in this direction");
    if (A.zero) return 0.0;
    const double R = 4.0 * (std::max(obs.bounding_radius(), A.length_scale) + 1.0);
    std::vector<double> vals;
    for (const auto& l : reps) vals.push_back(curve_integral(A.eval, closure_curve(obs, l, R), opt.tol));
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    if (*hi - *lo > opt.spread_tol)
        throw Error(ErrorKind::FluxMismatch,
                    "closure integrals differ across representatives by " + std::to_string(*hi - *lo));
    double s = 0.0;
    for (double x : vals) s += x;
    return s / vals.size();
}

FluxRecord flux_record(const VectorPotential& A, const Obstacle& obs, const HomologyLabel& h,
                       const Vec3& v, const HoleFluxOptions& opt)
{
    FluxRecord r;
    r.h = h;
    r.v = v.normalized();
    r.F_h = hole_flux(A, obs, h, v, opt);
    r.Phi_L = A.decay.kind == DecayKind::ShortRange ? 0.0 : long_range_flux(A, v);
    return r;
}

AngularDerivative angular_derivative_xray(const LineFunctional& F, const Vec3& x, const Vec3& v_in,
                                          const Vec3& vperp_in, double dtheta, const Obstacle* obs)
{
    const Vec3 v = v_in.normalized();
    const Vec3 vp = (vperp_in - vperp_in.dot(v) * v).normalized();
    auto line_at = [&](double t) { return Line{x, std::cos(t) * v + std::sin(t) * vp}; };
    if (obs && !obs->empty()) {
        const HomologyLabel h0 = crossing_label(*obs, line_at(0.0));
        for (double t : {-dtheta, -0.5 * dtheta, 0.0, 0.5 * dtheta, dtheta}) {
            const Line l = line_at(t);
            if (obs->line_distance(l) <= 0.0 || crossing_label(*obs, l) != h0)
                throw Error(ErrorKind::ClassCrossing, "rotated line changes homology class");
        }
    }
    AngularDerivative d;
    d.central = (F(line_at(dtheta)) - F(line_at(-dtheta))) / (2.0 * dtheta);
    const double half = (F(line_at(0.5 * dtheta)) - F(line_at(-0.5 * dtheta))) / dtheta;
    d.richardson = (4.0 * half - d.central) / 3.0;
    return d;
}

AngularDerivative angular_derivative_xray(const VectorPotential& A, const Vec3& x, const Vec3& v,
                                          const Vec3& vperp, double dtheta, const Obstacle* obs,
                                          double tol)
{
    // Lines are parametrized from x so the rotation pivots there.
    const double L = std::max(0.5, A.length_scale);
    auto F = [&](const Line& l) {
        if (A.zero) return 0.0;
        auto f = [&](double t) { return A(l.point(t)).dot(l.dir); };
        return integrate_real_line(f, L, tol).value;
    };
    return angular_derivative_xray(F, x, v, vperp, dtheta, obs);
}

double moment_integral(const VecField& B, const Vec3& x, const Vec3& v_in, const Vec3& vperp,
                       double length_scale, double tol)
{
    const Vec3 v = v_in.normalized();
    const Vec3 n = vperp.cross(v);
    auto f = [&](double t) { return t * B(x + t * v).dot(n); };
    return integrate_real_line(f, std::max(0.5, length_scale), tol).value;
}

}  // namespace kgs
