#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "kgscatter/geometry.hpp"
#include "kgscatter/potentials.hpp"

namespace kgs {

struct XRaySample {
    LineQuery query;
    double int_A = 0.0;
    double int_A0 = 0.0;
    double error = 0.0;
};

// Line integrals of A.v and A0 over the whole line; v is normalized internally.
XRaySample xray(const VectorPotential& A, const ElectricPotential& A0, const LineQuery& q,
                double tol = 1e-10);
double xray_A(const VectorPotential& A, const Line& line, double tol = 1e-10);
double xray_A0(const ElectricPotential& A0, const Line& line, double tol = 1e-10);

std::vector<XRaySample> xray_batch(const VectorPotential& A, const ElectricPotential& A0,
                                   const std::vector<LineQuery>& lines, double tol = 1e-10);
std::vector<XRaySample> xray_batch_serial(const VectorPotential& A, const ElectricPotential& A0,
                                          const std::vector<LineQuery>& lines,
                                          double tol = 1e-10);

void write_xray_csv(std::ostream& os, const std::vector<XRaySample>& rows);

double curve_integral(const VecField& A, const ClosedCurve& c, double tol = 1e-11);

// Integral of A over the half circle of radius s about x, from x + s v to x - s v through v_perp.
double half_circle_integral(const VecField& A, const Vec3& x, const Vec3& v, const Vec3& vperp,
                            double s, double tol = 1e-11);

struct LongRangeOptions {
    std::vector<double> schedule;  // radii; empty picks 8(L+1) * {1, 2, 4, 8, 16}
    Vec3 x = Vec3::Zero();
    std::optional<Vec3> vperp;
    double tol = 1e-9;
    double stall_tol = 1e-6;  // last Richardson change allowed
    double cross_check_tol = 1e-4;
};

// Phi_L(A, v) = -lim_s (half-circle integral), Richardson-extrapolated in 1/s.
double long_range_flux(const VectorPotential& A, const Vec3& v, const LongRangeOptions& opt = {});
// -int_0^pi A_inf(cos t v + sin t vp) . (-sin t v + cos t vp) dt
double long_range_flux_from_ainf(const VecField& a_inf, const Vec3& v, const Vec3& vperp);

struct FluxRecord {
    HomologyLabel h;
    double F_h = 0.0;
    double Phi_L = 0.0;
    Vec3 v = Vec3::UnitX();
};

struct HoleFluxOptions {
    int representatives = 3;
    double spread_tol = 1e-6;
    double tol = 1e-11;
    std::uint64_t seed = 11;
    int max_tries = 4000;
};

// Representative lines with direction v and homology label h.
std::vector<Line> representative_lines(const Obstacle& obs, const HomologyLabel& h, const Vec3& v,
                                       int count, std::uint64_t seed = 11, int max_tries = 4000);

// Closed-curve integral of A over the closure of a representative line of class h.
double hole_flux(const VectorPotential& A, const Obstacle& obs, const HomologyLabel& h,
                 const Vec3& v, const HoleFluxOptions& opt = {});
FluxRecord flux_record(const VectorPotential& A, const Obstacle& obs, const HomologyLabel& h,
                       const Vec3& v, const HoleFluxOptions& opt = {});

struct AngularDerivative {
    double central = 0.0;     // step dtheta
    double richardson = 0.0;  // combined with step dtheta/2
};

using LineFunctional = std::function<double(const Line&)>;

// d/dtheta of F(L(x, cos t v + sin t vp)) at t = 0. With an obstacle, the perturbed lines
// must keep the label of the unperturbed line.
AngularDerivative angular_derivative_xray(const LineFunctional& F, const Vec3& x, const Vec3& v,
                                          const Vec3& vperp, double dtheta = 1e-3,
                                          const Obstacle* obs = nullptr);
AngularDerivative angular_derivative_xray(const VectorPotential& A, const Vec3& x, const Vec3& v,
                                          const Vec3& vperp, double dtheta = 1e-3,
                                          const Obstacle* obs = nullptr, double tol = 1e-12);

// int tau B(x + tau v) . (vperp x v) dtau
double moment_integral(const VecField& B, const Vec3& x, const Vec3& v, const Vec3& vperp,
                       double length_scale = 1.0, double tol = 1e-12);

}  // namespace kgs
