#pragma once

#include <array>
#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include "kgscatter/geometry.hpp"
#include "kgscatter/lineflux.hpp"
#include "kgscatter/potentials.hpp"

namespace kgs {

using cplx = std::complex<double>;
using Mat2 = std::array<std::array<cplx, 2>, 2>;

struct DiagonalizerAlgebra {
    double m = 1.0;

    static Mat2 Q();
    static Mat2 Q_inv();
    static Mat2 beta();
    double b0(double p) const { return std::sqrt(p * p + m * m); }
    double velocity(double p) const { return p / b0(p); }
    // max |Q Q* - I| and max |Q beta Q^-1 - diag(1,-1)|
    static double unitarity_residual();
    static double diagonalization_residual();
};

Mat2 mat_mul(const Mat2& a, const Mat2& b);
Mat2 mat_adjoint(const Mat2& a);

constexpr double kExactLimit = std::numeric_limits<double>::infinity();

struct PhasePair {
    double theta_plus = 0.0;
    double theta_minus = 0.0;
    LineQuery query;
    double v = kExactLimit;

    double int_A() const { return 0.5 * (theta_plus - theta_minus); }
    double int_A0() const { return -0.5 * (theta_plus + theta_minus); }
};

PhasePair phase_pair_from(const XRaySample& s);
PhasePair hm_phase(const VectorPotential& A, const ElectricPotential& A0, const LineQuery& q,
                   double tol = 1e-10);
std::vector<PhasePair> hm_phase_batch(const VectorPotential& A, const ElectricPotential& A0,
                                      const std::vector<LineQuery>& lines, double tol = 1e-10);

PhasePair gauge_transform_S(const PhasePair& p, const ScalarField& lambda_inf, const Vec3& v);
std::vector<PhasePair> gauge_transform_S(const std::vector<PhasePair>& p,
                                         const ScalarField& lambda_inf, const Vec3& v);

// Caches flux records per (label, direction).
class FluxTable {
public:
    FluxTable(const VectorPotential& A, const Obstacle& obs, HoleFluxOptions opt = {});
    const FluxRecord& get(const HomologyLabel& h, const Vec3& v);

private:
    VectorPotential A_;
    Obstacle obs_;
    HoleFluxOptions opt_;
    std::mutex mu_;
    std::map<std::pair<HomologyLabel, std::array<double, 3>>, FluxRecord> cache_;
};

// theta_+ = F_h + Phi_L(A, v), theta_- = -theta_+, for field-free configurations.
PhasePair hole_sum_phase(const VectorPotential& A, const ElectricPotential& A0,
                         const Obstacle& obs, const Vec3& v, const Vec3& x,
                         FluxTable* table = nullptr);

// Two-component packet sampled on a transverse grid of lines with direction nu.
struct TransverseGrid {
    Vec3 origin = Vec3::Zero();
    Vec3 nu = Vec3::UnitX();
    int n = 64;
    double h = 0.1;

    Vec3 e1() const;
    Vec3 e2() const;
    Vec3 point(int i, int j) const;  // centered: indices 0..n-1 span [-(n-1)h/2, (n-1)h/2]
    Line line(int i, int j) const { return Line{point(i, j), nu}; }
};

struct TransversePacket {
    TransverseGrid grid;
    std::vector<cplx> c1, c2;
};

// theta values per transverse line, row-major like the packet.
struct PhaseMap {
    std::vector<double> theta_plus, theta_minus;
};

PhaseMap phase_map(const TransverseGrid& g, const std::function<PhasePair(const Line&)>& f);

// <diag(e^{i theta_+}, e^{i theta_-}) phi, psi> per component.
std::array<cplx, 2> wavepacket_overlap(const PhaseMap& phases, const TransversePacket& phi,
                                       const TransversePacket& psi,
                                       const Obstacle* obs = nullptr, double support_tol = 1e-12);

TransversePacket gaussian_transverse_packet(const TransverseGrid& g, const Vec3& center,
                                            double width, cplx a1, cplx a2);

}  // namespace kgs
