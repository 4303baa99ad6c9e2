#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kgscatter/geometry.hpp"
#include "kgscatter/vec.hpp"

namespace kgs {

using ScalarField = std::function<double(const Vec3&)>;
using VecField = std::function<Vec3(const Vec3&)>;

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class DecayKind { ShortRange, LongRange, LongRangeDelta };

struct DecayClass {
    DecayKind kind = DecayKind::ShortRange;
    double zeta = 2.0;   // SR exponent
    double delta = 2.0;  // LRdelta exponent

    static DecayClass short_range(double z) { return {DecayKind::ShortRange, z, 2.0}; }
    static DecayClass long_range() { return {DecayKind::LongRange, 1.0, 0.0}; }
    static DecayClass long_range_delta(double d) { return {DecayKind::LongRangeDelta, 1.0, d}; }
    std::string label() const;
};

struct MagneticField {
    VecField eval;
    double mu = kInf;
    double support_radius = kInf;
    Vec3 support_center = Vec3::Zero();
    double length_scale = 1.0;
    std::string name = "zero";
    bool zero = true;

    Vec3 operator()(const Vec3& x) const { return zero ? Vec3::Zero().eval() : eval(x); }
};

struct ElectricPotential {
    ScalarField eval;
    double zeta = kInf;
    double length_scale = 1.0;
    Vec3 center = Vec3::Zero();
    std::string name = "zero";
    bool zero = true;

    double operator()(const Vec3& x) const { return zero ? 0.0 : eval(x); }
};

struct GaugeFunction {
    ScalarField eval;
    ScalarField lambda_inf;  // evaluated on unit vectors
};

struct VectorPotential {
    VecField eval;
    VecField field;  // curl A; empty means curl-free outside the obstacle
    DecayClass decay;
    std::vector<double> flux;  // circulation over each dual curve
    std::optional<VecField> a_inf;
    std::optional<ScalarField> lambda_inf;
    double length_scale = 1.0;
    std::string name = "zero";
    bool zero = true;

    Vec3 operator()(const Vec3& x) const { return zero ? Vec3::Zero().eval() : eval(x); }
    Vec3 curl(const Vec3& x) const
    {
        return (zero || !field) ? Vec3::Zero().eval() : field(x);
    }
};

VectorPotential zero_potential(std::size_t n_handles = 0);
ElectricPotential zero_electric();
MagneticField zero_field();

VectorPotential operator+(const VectorPotential& a, const VectorPotential& b);
ElectricPotential operator+(const ElectricPotential& a, const ElectricPotential& b);
MagneticField operator+(const MagneticField& a, const MagneticField& b);
VectorPotential scaled(const VectorPotential& a, double s);

// Comparison function iota_{a,b}(|x|).
double iota(double a, double b, double r);

// Polynomial sum_k c_k w_x^a w_y^b w_z^c restricted to the unit sphere.
struct SpherePolynomial {
    struct Term {
        double coef;
        int px, py, pz;
    };
    std::vector<Term> terms;

    double value(const Vec3& w) const;
    Vec3 gradient(const Vec3& w) const;             // ambient gradient of the polynomial
    Vec3 tangential_gradient(const Vec3& w) const;  // projected onto the tangent plane at w
};

// Smooth step: 0 for r <= r0, 1 for r >= 2 r0.
double smooth_step(double r, double r0);
double smooth_step_derivative(double r, double r0);

// Solid angle of the disk spanning the torus hole, seen from x.
double disk_solid_angle(const Torus& t, const Vec3& x, double tol = 1e-12);

VectorPotential make_ab_torus_potential(const Obstacle& obs, std::size_t handle, double flux);

struct CoulombOptions {
    std::vector<int> schedule = {4, 6, 8, 10, 12, 14, 16};  // Gauss-Legendre order per cell and axis
    double rel_tol = 1e-5;
    std::vector<double> cell_scales = {2.0, 1.0, 0.5};  // cell edge / field length scale
};
VectorPotential make_coulomb_potential(const MagneticField& B, const CoulombOptions& opt = {});

std::pair<VectorPotential, GaugeFunction> make_longrange_potential(const SpherePolynomial& f,
                                                                   double r0);

// Gradient of amp * exp(-|x-c|^2 / w^2); compact-like gauge with vanishing angular limit.
std::pair<VectorPotential, GaugeFunction> make_gaussian_gauge(const Vec3& center, double width,
                                                              double amp);

// A = a0 exp(-|r|^2 / 2 s^2) (n x r), r = x - c. Divergence-free.
VectorPotential make_vortex_potential(const Vec3& center, const Vec3& axis, double width,
                                      double a0);
MagneticField make_vortex_field(const Vec3& center, const Vec3& axis, double width, double a0);

// Toroidal field amp * bump((rho-R)^2+z^2 < s^2) e_phi, confined to a tube.
MagneticField make_toroidal_bump_field(const Vec3& center, const Vec3& axis, double major,
                                       double tube, double amp);

ElectricPotential make_gaussian_electric(const Vec3& center, double width, double amp);
// amp (1 + |x-c|^2/w^2)^(-zeta/2), optionally multiplied by a smooth window
// equal to 1 below r_in and 0 beyond r_out.
ElectricPotential make_algebraic_electric(const Vec3& center, double width, double amp,
                                          double zeta, double r_in = kInf, double r_out = kInf);
// amp_odd (x.n / w) q^(-(zeta+1)/2) + amp_even q^(-zeta/2), q = 1 + |x-c|^2/w^2, same window.
ElectricPotential make_odd_algebraic_electric(const Vec3& center, const Vec3& axis, double width,
                                              double amp_odd, double amp_even, double zeta,
                                              double r_in = kInf, double r_out = kInf);

// Numerical validation helpers.
Vec3 numerical_curl(const VecField& A, const Vec3& x, double h = 1e-4);
double numerical_divergence(const VecField& F, const Vec3& x, double h = 1e-4);
double circulation(const VecField& A, const Circle& c, double tol = 1e-11);

// Least-squares slope of log|F| against log r along rays.
double decay_slope(const std::function<double(const Vec3&)>& magnitude, const Vec3& center,
                   double r_min, double r_max, int n_rays = 6, int n_radii = 8,
                   std::uint64_t seed = 7);

struct ClassReport {
    bool ok = true;
    std::vector<std::string> messages;
};
ClassReport validate_vector_potential(const VectorPotential& A, const Obstacle& obs,
                                      std::uint64_t seed = 7);
ClassReport validate_electric(const ElectricPotential& A0, std::uint64_t seed = 7);
ClassReport validate_field(const MagneticField& B, const Obstacle& obs, std::uint64_t seed = 7);

Vec3 a_infinity(const VectorPotential& A, const Vec3& v, double tau0 = 16.0);

double radial_component_bound(const VectorPotential& A, double r, int samples = 10000,
                              std::uint64_t seed = 7);

struct GaugeOptions {
    double tol = 1e-10;
    double far_radius = 1e3;
    double path_tol = 1e-7;
};
// lambda with lambda(anchor) = 0 and grad lambda = A2 - A1 away from the obstacle.
GaugeFunction gauge_between(const VectorPotential& A1, const VectorPotential& A2,
                            const Obstacle& obs, const Vec3& anchor,
                            const GaugeOptions& opt = {});

}  // namespace kgs
