#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "kgscatter/vec.hpp"

namespace kgs {

struct Ball {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

struct Torus {
    Vec3 center = Vec3::Zero();
    Vec3 axis = Vec3::UnitZ();
    double major_radius = 2.0;
    double minor_radius = 0.5;

    // Orthonormal frame (e1, e2, axis) with e1 x e2 = axis.
    Vec3 e1() const;
    Vec3 e2() const;
    double surface_distance(const Vec3& p) const;
};

// Oriented circle: counterclockwise about the normal.
struct Circle {
    Vec3 center = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    double radius = 1.0;

    Vec3 e1() const;
    Vec3 e2() const;
    Vec3 point(double phi) const;
    Vec3 tangent(double phi) const;  // derivative in phi
};

struct Line {
    Vec3 base = Vec3::Zero();
    Vec3 dir = Vec3::UnitX();
    Vec3 point(double t) const { return base + t * dir; }
};

using HomologyLabel = std::vector<int>;

struct LineQuery {
    Line line;
    HomologyLabel label;
};

class Obstacle {
public:
    Obstacle() = default;
    Obstacle(std::vector<Ball> balls, std::vector<Torus> tori, double collar = -1.0);

    const std::vector<Ball>& balls() const { return balls_; }
    const std::vector<Torus>& tori() const { return tori_; }
    std::size_t handle_count() const { return tori_.size(); }
    bool empty() const { return balls_.empty() && tori_.empty(); }

    Circle handle_curve(std::size_t j) const;  // core circle
    Circle dual_curve(std::size_t j) const;    // meridian, links the core +1

    double distance(const Vec3& p) const;  // signed; negative inside
    double line_distance(const Line& l) const;
    double plane_distance(const Vec3& y, const Vec3& normal) const;
    double bounding_radius() const;  // about the origin
    double diameter() const;
    double min_separation() const;
    double collar() const { return collar_; }

private:
    void validate();
    std::vector<Ball> balls_;
    std::vector<Torus> tori_;
    double collar_ = 0.0;
};

struct StraightSegment {
    Vec3 a, b;
};

struct ArcSegment {
    Vec3 center;
    double radius;
    Vec3 e1, e2;  // orthonormal, point(t) = c + r (cos t e1 + sin t e2)
    double theta0, theta1;
};

using CurveSegment = std::variant<StraightSegment, ArcSegment>;

Vec3 segment_start(const CurveSegment& s);
Vec3 segment_end(const CurveSegment& s);
double segment_length(const CurveSegment& s);
Vec3 segment_point(const CurveSegment& s, double u);    // u in [0,1]
Vec3 segment_tangent(const CurveSegment& s, double u);  // d/du

class ClosedCurve {
public:
    ClosedCurve() = default;
    ClosedCurve(std::vector<CurveSegment> segments, int resolution = 64);

    const std::vector<CurveSegment>& segments() const { return segments_; }
    int resolution() const { return resolution_; }
    void set_resolution(int r) { resolution_ = r; }
    double length() const;
    bool is_closed(double tol = 1e-12) const;
    // Straight segments stay single edges; arcs get `per_arc` edges.
    std::vector<Vec3> polyline(int per_arc) const;
    std::vector<Vec3> polyline() const { return polyline(resolution_); }
    ClosedCurve dilated(const Vec3& about, double s) const;
    ClosedCurve reversed() const;
    double distance_to(const Vec3& p, int samples = 512) const;

private:
    std::vector<CurveSegment> segments_;
    int resolution_ = 64;
};

enum class ArcChoice { Short, Long };

// Exact Gauss integral of two closed polygons (vertex lists, closing edge implied).
double polygon_linking(const std::vector<Vec3>& a, const std::vector<Vec3>& b);
// Midpoint-rule Gauss double sum over the same polygons.
double polygon_linking_midpoint(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                                int sub = 1);
std::vector<Vec3> circle_polygon(const Circle& c, int n);

// Linking number with adaptive refinement; throws LinkingNotInteger if not quantized.
int linking_number(const ClosedCurve& curve, const Circle& circle, double* residual = nullptr);

ClosedCurve closure_curve(const Obstacle& obs, const Line& line, double R,
                          ArcChoice choice = ArcChoice::Short);
// Arc bulging towards `side` (used for the half-circle dilation family).
ClosedCurve closure_curve_towards(const Obstacle& obs, const Line& line, double R,
                                  const Vec3& side);

HomologyLabel classify_line(const Obstacle& obs, const Line& line,
                            std::vector<double>* residuals = nullptr);
// Same label through signed crossings of each core disk; cheap independent route.
HomologyLabel crossing_label(const Obstacle& obs, const Line& line);

LineQuery make_query(const Obstacle& obs, const Line& line);

// Parameters in [0,1] along a -> b with steps growing with the distance from the origin.
std::vector<double> graded_parameters(const Vec3& a, const Vec3& b, double h0 = 0.5,
                                      double growth = 0.25);

ClosedCurve gamma_curve(const Obstacle& obs, const Vec3& x, const Vec3& v, const Vec3& y,
                        const Vec3& w, double rho);

bool lambda_rec_check(const Obstacle& obs, const Vec3& y, const Vec3& normal);

}  // namespace kgs
