#include "kgscatter/geometry.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "kgscatter/errors.hpp"

namespace kgs {

namespace {

Vec3 frame_e1(const Vec3& axis)
{
    return any_perpendicular(axis);
}

double ball_distance(const Ball& b, const Vec3& p) { return (p - b.center).norm() - b.radius; }

// Minimum over phi of f(phi), f periodic with period 2 pi, by sampling then Brent.
template <class F>
double periodic_min(F f, int samples = 96)
{
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    const double h = kTwoPi / samples;
    for (int i = 0; i < samples; ++i) {
        double v = f(i * h);
        if (v < best) {
            best = v;
            arg = i;
        }
    }
    auto r = boost::math::tools::brent_find_minima(f, (arg - 1) * h, (arg + 1) * h, 50);
    return std::min(best, r.second);
}

double torus_line_distance(const Torus& t, const Line& l)
{
    // Distance from the core circle to the line, minus the tube radius.
    const Vec3 e1 = t.e1(), e2 = t.e2();
    const Vec3 d = l.dir.normalized();
    auto f = [&](double phi) {
        Vec3 c = t.center + t.major_radius * (std::cos(phi) * e1 + std::sin(phi) * e2);
        Vec3 r = c - l.base;
        return (r - r.dot(d) * d).norm();
    };
    return periodic_min(f) - t.minor_radius;
}

double torus_plane_distance(const Torus& t, const Vec3& y, const Vec3& normal)
{
    const Vec3 n = normal.normalized();
    const Vec3 e1 = t.e1(), e2 = t.e2();
    // Height of core points above the plane is h0 + A cos(phi) + B sin(phi).
    double h0 = (t.center - y).dot(n);
    double amp = t.major_radius * std::hypot(e1.dot(n), e2.dot(n));
    double lo = h0 - amp, hi = h0 + amp;
    if (lo <= 0.0 && hi >= 0.0) return -t.minor_radius;
    return std::min(std::abs(lo), std::abs(hi)) - t.minor_radius;
}

}  // namespace

Vec3 Torus::e1() const { return frame_e1(axis); }
Vec3 Torus::e2() const { return axis.normalized().cross(e1()); }

double Torus::surface_distance(const Vec3& p) const
{
    const Vec3 a = axis.normalized();
    const Vec3 r = p - center;
    double z = r.dot(a);
    double rho = (r - z * a).norm();
    return std::hypot(rho - major_radius, z) - minor_radius;
}

Vec3 Circle::e1() const { return frame_e1(normal); }
Vec3 Circle::e2() const { return normal.normalized().cross(e1()); }
Vec3 Circle::point(double phi) const
{
    return center + radius * (std::cos(phi) * e1() + std::sin(phi) * e2());
}
Vec3 Circle::tangent(double phi) const
{
    return radius * (-std::sin(phi) * e1() + std::cos(phi) * e2());
}

Obstacle::Obstacle(std::vector<Ball> balls, std::vector<Torus> tori, double collar)
    : balls_(std::move(balls)), tori_(std::move(tori))
{
    for (auto& t : tori_) t.axis.normalize();
    validate();
    if (collar >= 0.0) {
        collar_ = collar;
    } else if (balls_.size() + tori_.size() >= 2) {
        collar_ = 0.5 * min_separation();
    } else if (!tori_.empty()) {
        collar_ = 0.25 * tori_[0].minor_radius;
    } else if (!balls_.empty()) {
        collar_ = 0.25 * balls_[0].radius;
    }
}

void Obstacle::validate()
{
    for (const auto& b : balls_)
        if (!(b.radius > 0.0)) throw Error(ErrorKind::InvalidGeometry, "ball radius must be positive");
    for (const auto& t : tori_) {
        if (!(t.minor_radius > 0.0 && t.minor_radius < t.major_radius))
            throw Error(ErrorKind::InvalidGeometry, "torus needs 0 < r_min < R_maj");
        if (!(t.axis.norm() > 0.0)) throw Error(ErrorKind::InvalidGeometry, "torus axis is zero");
    }
    if (balls_.size() + tori_.size() >= 2 && !(min_separation() > 0.0))
        throw Error(ErrorKind::InvalidGeometry, "obstacle components overlap");
}

Circle Obstacle::handle_curve(std::size_t j) const
{
    const Torus& t = tori_.at(j);
    return Circle{t.center, t.axis, t.major_radius};
}

Circle Obstacle::dual_curve(std::size_t j) const
{
    // Meridian around the tube at phi = 0, oriented so that it links the core +1.
    const Torus& t = tori_.at(j);
    const Vec3 e1 = t.e1();
    const Vec3 e2 = t.e2();
    const double r = 0.5 * (t.minor_radius + t.major_radius);
    return Circle{t.center + t.major_radius * e1, e2, r};
}

double Obstacle::distance(const Vec3& p) const
{
    double d = std::numeric_limits<double>::infinity();
    for (const auto& b : balls_) d = std::min(d, ball_distance(b, p));
    for (const auto& t : tori_) d = std::min(d, t.surface_distance(p));
    return d;
}

double Obstacle::line_distance(const Line& l) const
{
    double d = std::numeric_limits<double>::infinity();
    const Vec3 dir = l.dir.normalized();
    for (const auto& b : balls_) {
        Vec3 r = b.center - l.base;
        d = std::min(d, (r - r.dot(dir) * dir).norm() - b.radius);
    }
    for (const auto& t : tori_) d = std::min(d, torus_line_distance(t, Line{l.base, dir}));
    return d;
}

double Obstacle::plane_distance(const Vec3& y, const Vec3& normal) const
{
    double d = std::numeric_limits<double>::infinity();
    const Vec3 n = normal.normalized();
    for (const auto& b : balls_) d = std::min(d, std::abs((b.center - y).dot(n)) - b.radius);
    for (const auto& t : tori_) d = std::min(d, torus_plane_distance(t, y, n));
    return d;
}

double Obstacle::bounding_radius() const
{
    double r = 0.0;
    for (const auto& b : balls_) r = std::max(r, b.center.norm() + b.radius);
    for (const auto& t : tori_) r = std::max(r, t.center.norm() + t.major_radius + t.minor_radius);
    return r;
}

double Obstacle::diameter() const
{
    std::vector<std::pair<Vec3, double>> s;
    for (const auto& b : balls_) s.push_back({b.center, b.radius});
    for (const auto& t : tori_) s.push_back({t.center, t.major_radius + t.minor_radius});
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i; j < s.size(); ++j)
            d = std::max(d, (s[i].first - s[j].first).norm() + s[i].second + s[j].second);
    return d;
}

double Obstacle::min_separation() const
{
    double best = std::numeric_limits<double>::infinity();
    const std::size_t nb = balls_.size(), nt = tori_.size();
    for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t j = i + 1; j < nb; ++j)
            best = std::min(best, (balls_[i].center - balls_[j].center).norm() - balls_[i].radius -
                                      balls_[j].radius);
    for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t j = 0; j < nt; ++j) best = std::min(best, tori_[j].surface_distance(balls_[i].center) - balls_[i].radius);
    for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t j = i + 1; j < nt; ++j) {
            // Sample the core of one torus against the surface distance of the other, both ways.
            const Torus& a = tori_[i];
            const Torus& b = tori_[j];
            auto dab = [&](const Torus& p, const Torus& q) {
                return periodic_min([&](double phi) {
                    Circle c{p.center, p.axis, p.major_radius};
                    return q.surface_distance(c.point(phi));
                }, 256) - p.minor_radius;
            };
            best = std::min({best, dab(a, b), dab(b, a)});
        }
    return best;
}

// ---------------------------------------------------------------------------
// Curves

Vec3 segment_start(const CurveSegment& s)
{
    if (auto* p = std::get_if<StraightSegment>(&s)) return p->a;
    const auto& a = std::get<ArcSegment>(s);
    return a.center + a.radius * (std::cos(a.theta0) * a.e1 + std::sin(a.theta0) * a.e2);
}

Vec3 segment_end(const CurveSegment& s)
{
    if (auto* p = std::get_if<StraightSegment>(&s)) return p->b;
    const auto& a = std::get<ArcSegment>(s);
    return a.center + a.radius * (std::cos(a.theta1) * a.e1 + std::sin(a.theta1) * a.e2);
}

double segment_length(const CurveSegment& s)
{
    if (auto* p = std::get_if<StraightSegment>(&s)) return (p->b - p->a).norm();
    const auto& a = std::get<ArcSegment>(s);
    return a.radius * std::abs(a.theta1 - a.theta0);
}

Vec3 segment_point(const CurveSegment& s, double u)
{
    if (auto* p = std::get_if<StraightSegment>(&s)) return p->a + u * (p->b - p->a);
    const auto& a = std::get<ArcSegment>(s);
    double th = a.theta0 + u * (a.theta1 - a.theta0);
    return a.center + a.radius * (std::cos(th) * a.e1 + std::sin(th) * a.e2);
}

Vec3 segment_tangent(const CurveSegment& s, double u)
{
    if (auto* p = std::get_if<StraightSegment>(&s)) return p->b - p->a;
    const auto& a = std::get<ArcSegment>(s);
    double th = a.theta0 + u * (a.theta1 - a.theta0);
    return (a.theta1 - a.theta0) * a.radius * (-std::sin(th) * a.e1 + std::cos(th) * a.e2);
}

ClosedCurve::ClosedCurve(std::vector<CurveSegment> segments, int resolution)
    : segments_(std::move(segments)), resolution_(resolution)
{
}

double ClosedCurve::length() const
{
    double l = 0.0;
    for (const auto& s : segments_) l += segment_length(s);
    return l;
}

bool ClosedCurve::is_closed(double tol) const
{
    if (segments_.empty()) return false;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& next = segments_[(i + 1) % segments_.size()];
        double scale = std::max(1.0, segment_end(segments_[i]).norm());
        if ((segment_end(segments_[i]) - segment_start(next)).norm() > tol * scale) return false;
    }
    return true;
}

std::vector<Vec3> ClosedCurve::polyline(int per_arc) const
{
    std::vector<Vec3> pts;
    for (const auto& s : segments_) {
        if (std::holds_alternative<StraightSegment>(s)) {
            pts.push_back(segment_start(s));
        } else {
            for (int k = 0; k < per_arc; ++k) pts.push_back(segment_point(s, double(k) / per_arc));
        }
    }
    return pts;
}

ClosedCurve ClosedCurve::dilated(const Vec3& about, double s) const
{
    std::vector<CurveSegment> out;
    out.reserve(segments_.size());
    for (const auto& seg : segments_) {
        if (auto* p = std::get_if<StraightSegment>(&seg)) {
            out.push_back(StraightSegment{about + s * (p->a - about), about + s * (p->b - about)});
        } else {
            ArcSegment a = std::get<ArcSegment>(seg);
            a.center = about + s * (a.center - about);
            a.radius *= s;
            out.push_back(a);
        }
    }
    return ClosedCurve(std::move(out), resolution_);
}

ClosedCurve ClosedCurve::reversed() const
{
    std::vector<CurveSegment> out;
    for (auto it = segments_.rbegin(); it != segments_.rend(); ++it) {
        if (auto* p = std::get_if<StraightSegment>(&*it)) {
            out.push_back(StraightSegment{p->b, p->a});
        } else {
            ArcSegment a = std::get<ArcSegment>(*it);
            std::swap(a.theta0, a.theta1);
            out.push_back(a);
        }
    }
    return ClosedCurve(std::move(out), resolution_);
}

double ClosedCurve::distance_to(const Vec3& p, int samples) const
{
    double d = std::numeric_limits<double>::infinity();
    for (const auto& s : segments_) {
        if (auto* q = std::get_if<StraightSegment>(&s)) {
            Vec3 ab = q->b - q->a;
            double t = std::clamp((p - q->a).dot(ab) / std::max(ab.squaredNorm(), 1e-300), 0.0, 1.0);
            d = std::min(d, (q->a + t * ab - p).norm());
        } else {
            for (int k = 0; k <= samples; ++k)
                d = std::min(d, (segment_point(s, double(k) / samples) - p).norm());
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Linking numbers

namespace {

// Oriented solid angle of the triangle (r1, r2, r3) seen from the origin.
double triangle_solid_angle(const Vec3& r1, const Vec3& r2, const Vec3& r3)
{
    double l1 = r1.norm(), l2 = r2.norm(), l3 = r3.norm();
    double num = r1.dot(r2.cross(r3));
    double den = l1 * l2 * l3 + r1.dot(r2) * l3 + r1.dot(r3) * l2 + r2.dot(r3) * l1;
    return 2.0 * std::atan2(num, den);
}

}  // namespace

double polygon_linking(const std::vector<Vec3>& a, const std::vector<Vec3>& b)
{
    const std::size_t na = a.size(), nb = b.size();
    double total = 0.0;
    for (std::size_t i = 0; i < na; ++i) {
        const Vec3& p0 = a[i];
        const Vec3& p1 = a[(i + 1) % na];
        for (std::size_t j = 0; j < nb; ++j) {
            const Vec3& q0 = b[j];
            const Vec3& q1 = b[(j + 1) % nb];
            // r(s,t) = x(s) - y(t) over the parallelogram of segment pairs.
            Vec3 r00 = p0 - q0, r10 = p1 - q0, r11 = p1 - q1, r01 = p0 - q1;
            total += triangle_solid_angle(r00, r10, r11) + triangle_solid_angle(r00, r11, r01);
        }
    }
    return -total / (4.0 * kPi);
}

double polygon_linking_midpoint(const std::vector<Vec3>& a, const std::vector<Vec3>& b, int sub)
{
    std::vector<std::pair<Vec3, Vec3>> ea, eb;  // midpoint, differential
    auto edges = [sub](const std::vector<Vec3>& p, std::vector<std::pair<Vec3, Vec3>>& e) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            Vec3 p0 = p[i], p1 = p[(i + 1) % p.size()];
            Vec3 d = (p1 - p0) / sub;
            for (int k = 0; k < sub; ++k) e.push_back({p0 + (k + 0.5) * d, d});
        }
    };
    edges(a, ea);
    edges(b, eb);
    double s = 0.0;
    for (const auto& [x, dx] : ea)
        for (const auto& [y, dy] : eb) {
            Vec3 r = x - y;
            double n = r.norm();
            s += r.dot(dx.cross(dy)) / (n * n * n);
        }
    return s / (4.0 * kPi);
}

std::vector<Vec3> circle_polygon(const Circle& c, int n)
{
    std::vector<Vec3> p(n);
    for (int k = 0; k < n; ++k) p[k] = c.point(kTwoPi * k / n);
    return p;
}

int linking_number(const ClosedCurve& curve, const Circle& circle, double* residual)
{
    int per_arc = std::max(8, curve.resolution() / 4);
    int nc = 64;
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int level = 0; level < 9; ++level) {
        double lk = polygon_linking(curve.polyline(per_arc), circle_polygon(circle, nc));
        double res = std::abs(lk - std::round(lk));
        if (!std::isnan(prev) && std::abs(lk - prev) < 1e-3 && res < 1e-3) {
            if (residual) *residual = res;
            return static_cast<int>(std::lround(lk));
        }
        prev = lk;
        per_arc *= 2;
        nc *= 2;
    }
    throw Error(ErrorKind::LinkingNotInteger,
                "linking number did not settle to an integer (last value " + std::to_string(prev) + ")");
}

// ---------------------------------------------------------------------------
// Closures

namespace {

void check_radius(const Obstacle& obs, double R)
{
    if (!(obs.bounding_radius() < R))
        throw Error(ErrorKind::RadiusTooSmall,
                    "obstacle reaches radius " + std::to_string(obs.bounding_radius()) +
                        " >= " + std::to_string(R));
}

// Chord of the line inside B(0,R), endpoints ordered along the line direction.
std::pair<Vec3, Vec3> chord(const Line& line, double R)
{
    const Vec3 d = line.dir.normalized();
    const Vec3 c = line.base - line.base.dot(d) * d;  // closest point to the origin
    double h2 = R * R - c.squaredNorm();
    if (!(h2 > 0.0)) throw Error(ErrorKind::RadiusTooSmall, "line misses the closing sphere");
    double h = std::sqrt(h2);
    return {c - h * d, c + h * d};
}

ClosedCurve close_with_arc(const Vec3& pm, const Vec3& pp, double R, const Vec3& side)
{
    // Arc from pp back to pm on the great circle through both, passing through the `side` half.
    Vec3 mid = 0.5 * (pm + pp);
    Vec3 chord_dir = (pp - pm).normalized();
    Vec3 normal;
    Vec3 s = side - side.dot(chord_dir) * chord_dir;
    if (mid.norm() > 1e-12 * R) {
        normal = pp.cross(pm);
    } else {
        normal = chord_dir.cross(s);
    }
    normal.normalize();
    // In-plane orthonormal frame starting at pp.
    Vec3 e1 = pp.normalized();
    Vec3 e2 = normal.cross(e1);
    double th_m = std::atan2(pm.dot(e2), pm.dot(e1));  // in (-pi, pi]
    if (th_m < 0) th_m += kTwoPi;                       // pm reached at th_m going ccw
    // Decide direction: ccw from 0 to th_m, or cw from 0 to th_m - 2pi.
    double mid_ccw = 0.5 * th_m;
    Vec3 probe = std::cos(mid_ccw) * e1 + std::sin(mid_ccw) * e2;
    double th1 = probe.dot(s) >= 0.0 ? th_m : th_m - kTwoPi;
    ArcSegment arc{Vec3::Zero(), R, e1, e2, 0.0, th1};
    return ClosedCurve({StraightSegment{pm, pp}, arc}, 64);
}

}  // namespace

ClosedCurve closure_curve(const Obstacle& obs, const Line& line, double R, ArcChoice choice)
{
    check_radius(obs, R);
    auto [pm, pp] = chord(line, R);
    Vec3 mid = 0.5 * (pm + pp);
    Vec3 side;
    if (mid.norm() > 1e-12 * R) {
        side = choice == ArcChoice::Short ? mid : -mid;
    } else {
        Vec3 p = any_perpendicular(line.dir);
        side = choice == ArcChoice::Short ? p : -p;
    }
    return close_with_arc(pm, pp, R, side);
}

ClosedCurve closure_curve_towards(const Obstacle& obs, const Line& line, double R,
                                  const Vec3& side)
{
    check_radius(obs, R);
    auto [pm, pp] = chord(line, R);
    return close_with_arc(pm, pp, R, side);
}

std::vector<double> graded_parameters(const Vec3& a, const Vec3& b, double h0, double growth)
{
    const double L = (b - a).norm();
    std::vector<double> out{0.0};
    if (L == 0.0) {
        out.push_back(1.0);
        return out;
    }
    double s = 0.0;
    while (s < 1.0) {
        const Vec3 p = a + s * (b - a);
        s += std::max(h0, growth * p.norm()) / L;
        out.push_back(std::min(s, 1.0));
    }
    return out;
}

HomologyLabel classify_line(const Obstacle& obs, const Line& line, std::vector<double>* residuals)
{
    if (!(obs.line_distance(line) > 0.0))
        throw Error(ErrorKind::LineIntersectsObstacle, "line meets the obstacle");
    HomologyLabel h;
    if (obs.handle_count() == 0) return h;
    const double R = std::max(obs.bounding_radius(), line.base.norm()) * 1.25 + 1.0;
    ClosedCurve c = closure_curve(obs, line, R, ArcChoice::Short);
    for (std::size_t j = 0; j < obs.handle_count(); ++j) {
        double res = 0.0;
        h.push_back(linking_number(c, obs.handle_curve(j), &res));
        if (residuals) residuals->push_back(res);
    }
    return h;
}

HomologyLabel crossing_label(const Obstacle& obs, const Line& line)
{
    HomologyLabel h;
    const Vec3 d = line.dir.normalized();
    for (const auto& t : obs.tori()) {
        const Vec3 a = t.axis.normalized();
        double dn = d.dot(a);
        if (std::abs(dn) < 1e-14) {
            h.push_back(0);
            continue;
        }
        double s = (t.center - line.base).dot(a) / dn;
        Vec3 p = line.base + s * d;
        // The chord crosses the core disk in the direction sign(dn); the
        // closing arc crosses the plane outside the disk.
        h.push_back((p - t.center).norm() < t.major_radius ? (dn > 0 ? 1 : -1) : 0);
    }
    return h;
}

LineQuery make_query(const Obstacle& obs, const Line& line)
{
    LineQuery q;
    q.line = Line{line.base, line.dir.normalized()};
    q.label = classify_line(obs, q.line);
    return q;
}

// ---------------------------------------------------------------------------

namespace {

// Distance from the origin to the convex hull of four points p(lambda,a,b) for
// segment [x - a v, y - b w]-type hulls: minimizes |P z| over the simplex of the
// corner points by projected gradient descent.
double hull_origin_distance(const std::vector<Vec3>& corners)
{
    const int n = static_cast<int>(corners.size());
    std::vector<double> w(n, 1.0 / n);
    auto point = [&]() {
        Vec3 p = Vec3::Zero();
        for (int i = 0; i < n; ++i) p += w[i] * corners[i];
        return p;
    };
    // Frank-Wolfe iterations; converge to the minimum norm point.
    for (int it = 0; it < 2000; ++it) {
        Vec3 p = point();
        int best = 0;
        double bv = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            double v = corners[i].dot(p);
            if (v < bv) {
                bv = v;
                best = i;
            }
        }
        Vec3 d = corners[best] - p;
        double dd = d.squaredNorm();
        if (dd < 1e-30) break;
        double step = std::clamp(-p.dot(d) / dd, 0.0, 1.0);
        if (step <= 0.0) break;
        for (int i = 0; i < n; ++i) w[i] *= (1.0 - step);
        w[best] += step;
    }
    return point().norm();
}

}  // namespace

ClosedCurve gamma_curve(const Obstacle& obs, const Vec3& x, const Vec3& v, const Vec3& y,
                        const Vec3& w, double rho)
{
    const Vec3 vn = v.normalized(), wn = w.normalized();
    const double r = obs.bounding_radius();
    // Hulls of {x+rho v, y+rho w, rays beyond} and {x-rho v, y-rho w, rays beyond}:
    // sample far points along the rays to represent the unbounded hull.
    for (int sgn : {1, -1}) {
        std::vector<Vec3> pts;
        for (double s : {rho, 4.0 * rho + 4.0 * r, 64.0 * (rho + r)}) {
            pts.push_back(x + sgn * s * vn);
            pts.push_back(y + sgn * s * wn);
        }
        if (!obs.empty() && hull_origin_distance(pts) <= r)
            throw Error(ErrorKind::ConvexHullViolation, "convex hull meets the obstacle ball");
    }
    Vec3 a = x - rho * vn, b = x + rho * vn, c = y + rho * wn, d = y - rho * wn;
    std::vector<CurveSegment> segs;
    if ((b - a).norm() > 0) segs.push_back(StraightSegment{a, b});
    if ((c - b).norm() > 0) segs.push_back(StraightSegment{b, c});
    if ((d - c).norm() > 0) segs.push_back(StraightSegment{c, d});
    if ((a - d).norm() > 0) segs.push_back(StraightSegment{d, a});
    return ClosedCurve(std::move(segs), 64);
}

bool lambda_rec_check(const Obstacle& obs, const Vec3& y, const Vec3& normal)
{
    if (obs.empty()) return true;
    return obs.plane_distance(y, normal) > obs.collar();
}

}  // namespace kgs
