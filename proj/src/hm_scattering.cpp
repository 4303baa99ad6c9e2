#include "kgscatter/hm_scattering.hpp"

#include <cmath>

#include "kgscatter/errors.hpp"

namespace kgs {

Mat2 DiagonalizerAlgebra::Q()
{
    const double s = 1.0 / std::sqrt(2.0);
    const cplx i(0.0, 1.0);
    return {{{s, s * i}, {s, -s * i}}};
}

Mat2 DiagonalizerAlgebra::Q_inv() { return mat_adjoint(Q()); }

Mat2 DiagonalizerAlgebra::beta()
{
    const cplx i(0.0, 1.0);
    return {{{0.0, i}, {-i, 0.0}}};
}

Mat2 mat_mul(const Mat2& a, const Mat2& b)
{
    Mat2 c{};
    for (int r = 0; r < 2; ++r)
        for (int k = 0; k < 2; ++k) c[r][k] = a[r][0] * b[0][k] + a[r][1] * b[1][k];
    return c;
}

Mat2 mat_adjoint(const Mat2& a)
{
    Mat2 c{};
    for (int r = 0; r < 2; ++r)
        for (int k = 0; k < 2; ++k) c[r][k] = std::conj(a[k][r]);
    return c;
}

namespace {
double residual(const Mat2& a, const Mat2& b)
{
    double m = 0.0;
    for (int r = 0; r < 2; ++r)
        for (int k = 0; k < 2; ++k) m = std::max(m, std::abs(a[r][k] - b[r][k]));
    return m;
}
}  // namespace

double DiagonalizerAlgebra::unitarity_residual()
{
    const Mat2 I = {{{1.0, 0.0}, {0.0, 1.0}}};
    return residual(mat_mul(Q(), mat_adjoint(Q())), I);
}

double DiagonalizerAlgebra::diagonalization_residual()
{
    const Mat2 D = {{{1.0, 0.0}, {0.0, -1.0}}};
    return residual(mat_mul(mat_mul(Q(), beta()), Q_inv()), D);
}

PhasePair phase_pair_from(const XRaySample& s)
{
    PhasePair p;
    p.query = s.query;
    p.theta_plus = s.int_A - s.int_A0;
    p.theta_minus = -(s.int_A + s.int_A0);
    return p;
}

PhasePair hm_phase(const VectorPotential& A, const ElectricPotential& A0, const LineQuery& q,
                   double tol)
{
    return phase_pair_from(xray(A, A0, q, tol));
}

std::vector<PhasePair> hm_phase_batch(const VectorPotential& A, const ElectricPotential& A0,
                                      const std::vector<LineQuery>& lines, double tol)
{
    std::vector<PhasePair> out;
    for (const auto& s : xray_batch(A, A0, lines, tol)) out.push_back(phase_pair_from(s));
    return out;
}

PhasePair gauge_transform_S(const PhasePair& p, const ScalarField& lambda_inf, const Vec3& v)
{
    const Vec3 n = v.normalized();
    const double d = lambda_inf(n) - lambda_inf(-n);
    PhasePair q = p;
    q.theta_plus += d;
    q.theta_minus -= d;
    return q;
}

std::vector<PhasePair> gauge_transform_S(const std::vector<PhasePair>& p,
                                         const ScalarField& lambda_inf, const Vec3& v)
{
    std::vector<PhasePair> out;
    out.reserve(p.size());
    for (const auto& x : p) out.push_back(gauge_transform_S(x, lambda_inf, v));
    return out;
}

FluxTable::FluxTable(const VectorPotential& A, const Obstacle& obs, HoleFluxOptions opt)
    : A_(A), obs_(obs), opt_(opt)
{
}

const FluxRecord& FluxTable::get(const HomologyLabel& h, const Vec3& v)
{
    const Vec3 n = v.normalized();
    auto key = std::make_pair(h, std::array<double, 3>{n.x(), n.y(), n.z()});
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(key, flux_record(A_, obs_, h, n, opt_)).first->second;
}

PhasePair hole_sum_phase(const VectorPotential& A, const ElectricPotential& A0,
                         const Obstacle& obs, const Vec3& v, const Vec3& x, FluxTable* table)
{
    if (!A0.zero) throw Error(ErrorKind::ConfigNotFieldFree, "electric potential is nonzero");
    if (!A.zero && A.field) throw Error(ErrorKind::ConfigNotFieldFree, "magnetic field is nonzero");
    const Line l{x, v.normalized()};
    PhasePair p;
    p.query = make_query(obs, l);
    FluxRecord rec;
    if (table) {
        rec = table->get(p.query.label, l.dir);
    } else {
        rec = flux_record(A, obs, p.query.label, l.dir);
    }
    p.theta_plus = rec.F_h + rec.Phi_L;
    p.theta_minus = -p.theta_plus;
    return p;
}

Vec3 TransverseGrid::e1() const { return any_perpendicular(nu.normalized()); }
Vec3 TransverseGrid::e2() const { return nu.normalized().cross(e1()); }

Vec3 TransverseGrid::point(int i, int j) const
{
    const double c = 0.5 * (n - 1);
    return origin + (i - c) * h * e1() + (j - c) * h * e2();
}

PhaseMap phase_map(const TransverseGrid& g, const std::function<PhasePair(const Line&)>& f)
{
    PhaseMap m;
    const std::size_t N = static_cast<std::size_t>(g.n) * g.n;
    m.theta_plus.resize(N);
    m.theta_minus.resize(N);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            PhasePair p = f(g.line(i, j));
            m.theta_plus[i * g.n + j] = p.theta_plus;
            m.theta_minus[i * g.n + j] = p.theta_minus;
        }
    return m;
}

std::array<cplx, 2> wavepacket_overlap(const PhaseMap& phases, const TransversePacket& phi,
                                       const TransversePacket& psi, const Obstacle* obs,
                                       double support_tol)
{
    const TransverseGrid& g = phi.grid;
    const std::size_t N = static_cast<std::size_t>(g.n) * g.n;
    if (phi.c1.size() != N || phi.c2.size() != N || psi.c1.size() != N || psi.c2.size() != N ||
        phases.theta_plus.size() != N || phases.theta_minus.size() != N)
        throw Error(ErrorKind::InvalidArgument, "packet and phase grids differ in size");
    if (obs && !obs->empty()) {
        double peak = 0.0;
        for (std::size_t k = 0; k < N; ++k)
            peak = std::max({peak, std::norm(phi.c1[k]), std::norm(phi.c2[k]), std::norm(psi.c1[k]),
                             std::norm(psi.c2[k])});
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) {
                const std::size_t k = static_cast<std::size_t>(i) * g.n + j;
                const double a = std::max({std::norm(phi.c1[k]), std::norm(phi.c2[k]),
                                           std::norm(psi.c1[k]), std::norm(psi.c2[k])});
                if (a > support_tol * peak && obs->line_distance(g.line(i, j)) <= obs->collar())
                    throw Error(ErrorKind::SupportViolation, "packet reaches the obstacle shadow");
            }
    }
    const double dA = g.h * g.h;
    cplx s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        s1 += std::polar(1.0, phases.theta_plus[k]) * phi.c1[k] * std::conj(psi.c1[k]);
        s2 += std::polar(1.0, phases.theta_minus[k]) * phi.c2[k] * std::conj(psi.c2[k]);
    }
    return {s1 * dA, s2 * dA};
}

TransversePacket gaussian_transverse_packet(const TransverseGrid& g, const Vec3& center,
                                            double width, cplx a1, cplx a2)
{
    TransversePacket p;
    p.grid = g;
    const std::size_t N = static_cast<std::size_t>(g.n) * g.n;
    p.c1.resize(N);
    p.c2.resize(N);
    const Vec3 n = g.nu.normalized();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            Vec3 d = g.point(i, j) - center;
            d -= d.dot(n) * n;
            const double w = std::exp(-d.squaredNorm() / (2.0 * width * width));
            p.c1[i * g.n + j] = a1 * w;
            p.c2[i * g.n + j] = a2 * w;
        }
    return p;
}

}  // namespace kgs
