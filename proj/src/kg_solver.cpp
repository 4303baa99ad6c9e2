#include "kgscatter/kg_solver.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>

#include "kgscatter/errors.hpp"
#include "kgscatter/parallel.hpp"

namespace kgs {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;
const cplx kI(0.0, 1.0);

std::mutex& planner_mutex()
{
    static std::mutex mu;
    return mu;
}

void init_fftw_threads()
{
    static std::once_flag once;
    std::call_once(once, [] {
        fftw_init_threads();
    });
}

inline fftw_complex* fc(std::vector<cplx>& v) { return reinterpret_cast<fftw_complex*>(v.data()); }
inline const fftw_complex* fc(const std::vector<cplx>& v)
{
    return reinterpret_cast<const fftw_complex*>(v.data());
}

// exp(-2 i a dt) and (1 - exp(-2 i a dt)) / (2 i a), the latter -> dt as a -> 0.
inline void interaction_coefficients(double a, double dt, cplx& e, cplx& g)
{
    double x = 2.0 * a * dt;
    e = std::polar(1.0, -x);
    if (std::abs(x) < 1e-6) {
        g = cplx(dt, 0.0) * (1.0 - kI * x / 2.0 - x * x / 6.0);
    } else {
        g = (1.0 - e) / (2.0 * kI * a);
    }
}

}  // namespace

struct KGSolver::StepTables {
    double dt = 0.0;
    std::vector<cplx> half;   // exp(-i B0 dt/2)
    std::vector<cplx> full;   // exp(-i B0 dt)
    std::vector<cplx> e, g;   // interaction coefficients, empty without A0
};

struct KGSolver::Scratch {
    std::vector<cplx> phih, phith, phi, phit, wphi, gx, gy, fx, fy;
    explicit Scratch(std::size_t n, bool magnetic)
        : phih(n), phith(n), phi(n), phit(n), wphi(n)
    {
        if (magnetic) {
            gx.resize(n);
            gy.resize(n);
            fx.resize(n);
            fy.resize(n);
        }
    }
};

struct KGSolver::Plans {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    ~Plans()
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        if (fwd) fftw_destroy_plan(fwd);
        if (bwd) fftw_destroy_plan(bwd);
    }
};

double WaveState::norm2() const
{
    double dA = grid.dx() * grid.dx();
    double s = 0.0;
    for (const auto& z : plus) s += std::norm(z);
    for (const auto& z : minus) s += std::norm(z);
    return s * dA;
}

double SolverScene::m_eff() const { return std::sqrt(mass * mass + p3 * p3); }

KGSolver::KGSolver(const SolverScene& scene, const SolverOptions& opt)
    : scene_(scene), opt_(opt), m_eff_(scene.m_eff())
{
    const int n = opt_.grid.n;
    if (n < 8 || (n % 2) != 0) throw Error(ErrorKind::InvalidArgument, "grid size must be even");
    if (opt_.dt <= 0.0) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
    const std::size_t N = opt_.grid.size();
    const double L = opt_.grid.extent;

    kx_.resize(n);
    for (int i = 0; i < n; ++i) kx_[i] = 2.0 * kPi / L * (i < n / 2 ? i : i - n);
    b0_.resize(N);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            b0_[static_cast<std::size_t>(j) * n + i] =
                std::sqrt(kx_[i] * kx_[i] + kx_[j] * kx_[j] + m_eff_ * m_eff_);

    a0_.assign(N, 0.0);
    ax_.assign(N, 0.0);
    ay_.assign(N, 0.0);
    w_.assign(N, 0.0);
    mask_.assign(N, 1.0);
    electric_ = static_cast<bool>(scene_.a0);
    magnetic_ = static_cast<bool>(scene_.a);
    const bool has_obstacle = static_cast<bool>(scene_.obstacle_distance);
    double max_a0 = 0.0;

#pragma omp parallel for reduction(max : max_a0) schedule(static)
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * n + i;
            Vec3 x(opt_.grid.coord(i), opt_.grid.coord(j), 0.0);
            double w = 0.0;
            if (electric_) {
                a0_[k] = scene_.a0(x);
                w -= a0_[k] * a0_[k];
                max_a0 = std::max(max_a0, std::abs(a0_[k]));
            }
            if (magnetic_) {
                Vec3 a = scene_.a(x);
                ax_[k] = a.x();
                ay_[k] = a.y();
                w += a.squaredNorm() - 2.0 * scene_.p3 * a.z();
            }
            if (has_obstacle) {
                double d = scene_.obstacle_distance(x);
                if (opt_.barrier == BarrierMode::Smooth) {
                    w += opt_.barrier_height * 0.5 * (1.0 - std::tanh(d / opt_.barrier_width));
                } else if (opt_.barrier == BarrierMode::Hard) {
                    mask_[k] = d > 0.0 ? 1.0 : 0.0;
                }
            }
            w_[k] = w;
        }
    }
    if (opt_.dt * max_a0 >= 0.1)
        throw Error(ErrorKind::StabilityViolation, "dt * max|A0| must stay below 0.1");

    if (opt_.absorber_width > 0.0) {
        absorb_.assign(N, 0.0);
        const double half = 0.5 * L;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                double d = std::min(half - std::abs(opt_.grid.coord(i)),
                                    half - std::abs(opt_.grid.coord(j)));
                double u = std::clamp(1.0 - d / opt_.absorber_width, 0.0, 1.0);
                absorb_[static_cast<std::size_t>(j) * n + i] = u * u;
            }
    }

    init_fftw_threads();
    plans_ = std::make_unique<Plans>();
    std::vector<cplx> tmp(N);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_plan_with_nthreads(max_threads());
    plans_->fwd = fftw_plan_dft_2d(n, n, fc(tmp), fc(tmp), FFTW_FORWARD,
                                   FFTW_MEASURE | FFTW_UNALIGNED);
    plans_->bwd = fftw_plan_dft_2d(n, n, fc(tmp), fc(tmp), FFTW_BACKWARD,
                                   FFTW_MEASURE | FFTW_UNALIGNED);
}

KGSolver::~KGSolver() = default;

void KGSolver::to_fourier(const std::vector<cplx>& in, std::vector<cplx>& out) const
{
    if (&in != &out) out = in;
    fftw_execute_dft(plans_->fwd, fc(out), fc(out));
}

void KGSolver::to_real(const std::vector<cplx>& in, std::vector<cplx>& out) const
{
    if (&in != &out) out = in;
    fftw_execute_dft(plans_->bwd, fc(out), fc(out));
    const double s = 1.0 / static_cast<double>(out.size());
    const std::ptrdiff_t N = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < N; ++k) out[k] *= s;
}

WaveState KGSolver::packet(const Vec3& center, const Vec3& nu, double v, double sigma,
                           bool plus_component) const
{
    WaveState s;
    s.grid = opt_.grid;
    s.v = v;
    s.nu = nu.normalized();
    s.sigma = sigma;
    s.m_eff = m_eff_;
    const int n = opt_.grid.n;
    s.plus.assign(s.grid.size(), cplx(0.0));
    s.minus.assign(s.grid.size(), cplx(0.0));
    auto& target = plus_component ? s.plus : s.minus;
    const double amp = 1.0 / std::sqrt(2.0 * kPi * sigma * sigma);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double x = opt_.grid.coord(i), y = opt_.grid.coord(j);
            double rx = x - center.x(), ry = y - center.y();
            double env = amp * std::exp(-(rx * rx + ry * ry) / (4.0 * sigma * sigma));
            double ph = v * (s.nu.x() * x + s.nu.y() * y);
            target[static_cast<std::size_t>(j) * n + i] = std::polar(env, ph);
        }
    return s;
}

KGSolver::StepTables KGSolver::make_tables(double dt) const
{
    StepTables t;
    t.dt = dt;
    const std::ptrdiff_t N = static_cast<std::ptrdiff_t>(b0_.size());
    t.half.resize(N);
    t.full.resize(N);
    if (electric_) {
        t.e.resize(N);
        t.g.resize(N);
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < N; ++k) {
        t.half[k] = std::polar(1.0, -0.5 * b0_[k] * dt);
        t.full[k] = t.half[k] * t.half[k];
        if (electric_) interaction_coefficients(a0_[k], dt, t.e[k], t.g[k]);
    }
    return t;
}

void KGSolver::apply_phase(std::vector<cplx>& up, std::vector<cplx>& um,
                           const std::vector<cplx>& e) const
{
    const std::ptrdiff_t N = static_cast<std::ptrdiff_t>(up.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < N; ++k) {
        up[k] *= e[k];
        um[k] *= std::conj(e[k]);
    }
}

void KGSolver::free_phase_fourier(std::vector<cplx>& up, std::vector<cplx>& um, double dt) const
{
    const std::ptrdiff_t N = static_cast<std::ptrdiff_t>(up.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < N; ++k) {
        cplx e = std::polar(1.0, -b0_[k] * dt);
        up[k] *= e;
        um[k] *= std::conj(e);
    }
}

void KGSolver::free_step(WaveState& s, double dt) const
{
    std::vector<cplx> up, um;
    to_fourier(s.plus, up);
    to_fourier(s.minus, um);
    free_phase_fourier(up, um, dt);
    to_real(up, s.plus);
    to_real(um, s.minus);
    s.t += dt;
}

void interaction_update_serial(std::vector<cplx>& phit, const std::vector<cplx>& wphi,
                               const std::vector<double>& a0, double dt)
{
    for (std::size_t k = 0; k < phit.size(); ++k) {
        cplx e, g;
        interaction_coefficients(a0.empty() ? 0.0 : a0[k], dt, e, g);
        phit[k] = e * phit[k] - g * wphi[k];
    }
}

void interaction_update(std::vector<cplx>& phit, const std::vector<cplx>& wphi,
                        const std::vector<double>& a0, double dt)
{
    const std::ptrdiff_t N = static_cast<std::ptrdiff_t>(phit.size());
    const bool has_a0 = !a0.empty();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < N; ++k) {
        cplx e, g;
        interaction_coefficients(has_a0 ? a0[k] : 0.0, dt, e, g);
        phit[k] = e * phit[k] - g * wphi[k];
    }
}

void KGSolver::apply_w(const std::vector<cplx>& up, const std::vector<cplx>& um,
                       Scratch& sc) const
{
    const int n = opt_.grid.n;
    const std::ptrdiff_t NN = static_cast<std::ptrdiff_t>(up.size());
    auto& phih = sc.phih;
    auto& phith = sc.phith;
    auto& phi = sc.phi;
    auto& phit = sc.phit;
    auto& wphi = sc.wphi;

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < NN; ++k) {
        phih[k] = (up[k] + um[k]) / (kSqrt2 * b0_[k]);
        phith[k] = (up[k] - um[k]) / (kI * kSqrt2);
    }
    to_real(phih, phi);
    to_real(phith, phit);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < NN; ++k) wphi[k] = w_[k] * phi[k];

    if (magnetic_) {
        // -(p.A + A.p) phi = i (A.grad phi + div(A phi))
        auto& gx = sc.gx;
        auto& gy = sc.gy;
        auto& fx = sc.fx;
        auto& fy = sc.fy;
#pragma omp parallel for schedule(static)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                std::size_t k = static_cast<std::size_t>(j) * n + i;
                double kxv = (i == n / 2) ? 0.0 : kx_[i];
                double kyv = (j == n / 2) ? 0.0 : kx_[j];
                gx[k] = kI * kxv * phih[k];
                gy[k] = kI * kyv * phih[k];
            }
        to_real(gx, gx);
        to_real(gy, gy);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t k = 0; k < NN; ++k) {
            wphi[k] += kI * (ax_[k] * gx[k] + ay_[k] * gy[k]);
            fx[k] = ax_[k] * phi[k];
            fy[k] = ay_[k] * phi[k];
        }
        to_fourier(fx, fx);
        to_fourier(fy, fy);
#pragma omp parallel for schedule(static)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                std::size_t k = static_cast<std::size_t>(j) * n + i;
                double kxv = (i == n / 2) ? 0.0 : kx_[i];
                double kyv = (j == n / 2) ? 0.0 : kx_[j];
                fx[k] = kI * (kxv * fx[k] + kyv * fy[k]);
            }
        to_real(fx, fx);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t k = 0; k < NN; ++k) wphi[k] += kI * fx[k];
    }
}

double KGSolver::energy_fourier(const std::vector<cplx>& up, const std::vector<cplx>& um,
                                Scratch& sc) const
{
    apply_w(up, um, sc);
    const std::ptrdiff_t NN = static_cast<std::ptrdiff_t>(up.size());
    double free = 0.0, pot = 0.0;
#pragma omp parallel for reduction(+ : free, pot) schedule(static)
    for (std::ptrdiff_t k = 0; k < NN; ++k) {
        free += std::norm(up[k]) + std::norm(um[k]);
        pot += (std::conj(sc.phi[k]) * sc.wphi[k]).real();
    }
    const double dA = opt_.grid.dx() * opt_.grid.dx();
    return (free / static_cast<double>(NN) + pot) * dA;
}

double KGSolver::energy(const WaveState& s) const
{
    std::vector<cplx> up, um;
    to_fourier(s.plus, up);
    to_fourier(s.minus, um);
    Scratch sc(up.size(), magnetic_);
    return energy_fourier(up, um, sc);
}

void KGSolver::interaction_fourier(std::vector<cplx>& up, std::vector<cplx>& um,
                                   const StepTables& tab, Scratch& sc) const
{
    const std::ptrdiff_t NN = static_cast<std::ptrdiff_t>(up.size());
    auto& phih = sc.phih;
    auto& phith = sc.phith;
    auto& phi = sc.phi;
    auto& phit = sc.phit;
    auto& wphi = sc.wphi;
    apply_w(up, um, sc);

    if (electric_) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t k = 0; k < NN; ++k) phit[k] = tab.e[k] * phit[k] - tab.g[k] * wphi[k];
    } else {
        const double dt = tab.dt;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t k = 0; k < NN; ++k) phit[k] -= dt * wphi[k];
    }

    const bool hard = opt_.barrier == BarrierMode::Hard && scene_.obstacle_distance;
    const bool absorb = !absorb_.empty();
    if (hard || absorb) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t k = 0; k < NN; ++k) {
            double f = mask_[k];
            if (absorb) f *= std::exp(-opt_.absorber_strength * absorb_[k] * tab.dt);
            phi[k] *= f;
            phit[k] *= f;
        }
        to_fourier(phi, phih);
    }
    to_fourier(phit, phith);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < NN; ++k) {
        cplx a = b0_[k] * phih[k];
        cplx b = kI * phith[k];
        up[k] = (a + b) / kSqrt2;
        um[k] = (a - b) / kSqrt2;
    }
}

void KGSolver::interaction_step(WaveState& s, double dt) const
{
    std::vector<cplx> up, um;
    to_fourier(s.plus, up);
    to_fourier(s.minus, um);
    StepTables tab = make_tables(dt);
    Scratch sc(up.size(), magnetic_);
    apply_phase(up, um, tab.half);
    interaction_fourier(up, um, tab, sc);
    apply_phase(up, um, tab.half);
    to_real(up, s.plus);
    to_real(um, s.minus);
    s.t += dt;
}

void KGSolver::evolve(WaveState& s, double t) const
{
    if (t == 0.0) return;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / opt_.dt - 1e-9)));
    const double h = t / steps;
    std::vector<cplx> up, um;
    to_fourier(s.plus, up);
    to_fourier(s.minus, um);
    StepTables tab = make_tables(h);
    Scratch sc(up.size(), magnetic_);
    const bool lossy = !absorb_.empty() || opt_.barrier == BarrierMode::Hard;
    const double e0 = lossy ? 0.0 : energy_fourier(up, um, sc);
    apply_phase(up, um, tab.half);
    for (int i = 0; i < steps; ++i) {
        interaction_fourier(up, um, tab, sc);
        apply_phase(up, um, i + 1 == steps ? tab.half : tab.full);
    }
    const double e1 = lossy ? 0.0 : energy_fourier(up, um, sc);
    to_real(up, s.plus);
    to_real(um, s.minus);
    s.t += t;
    const double drift = std::abs(e1 - e0) / std::max(std::abs(e0), 1e-300);
    if (!lossy && !(drift <= 1e-3 * std::abs(t)))
        throw Error(ErrorKind::StabilityViolation,
                    "norm drift " + std::to_string(drift) + " over time " + std::to_string(t));
}

cplx KGSolver::inner(const std::vector<cplx>& a, const std::vector<cplx>& b, double dA)
{
    cplx s(0.0);
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * std::conj(b[k]);
    return s * dA;
}

double KGSolver::leaked_fraction(const WaveState& s) const
{
    const int n = opt_.grid.n;
    const int band = std::max(1, static_cast<int>(std::ceil(opt_.escape_band * n)));
    double edge = 0.0, total = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            std::size_t k = static_cast<std::size_t>(j) * n + i;
            double m = std::norm(s.plus[k]) + std::norm(s.minus[k]);
            total += m;
            if (i < band || j < band || i >= n - band || j >= n - band) edge += m;
        }
    return total > 0.0 ? edge / total : 0.0;
}

WaveState KGSolver::scatter(const WaveState& in) const
{
    const double tau = 0.5 * opt_.T;
    WaveState s = in;
    free_step(s, -tau);
    double leak = leaked_fraction(s);
    if (leak > opt_.escape_tol)
        throw Error(ErrorKind::PacketEscaped,
                    "leaked fraction " + std::to_string(leak) + " at t = -T/2");
    evolve(s, 2.0 * tau);
    leak = leaked_fraction(s);
    if (leak > opt_.escape_tol)
        throw Error(ErrorKind::PacketEscaped,
                    "leaked fraction " + std::to_string(leak) + " at t = +T/2");
    free_step(s, -tau);
    s.t = in.t;
    return s;
}

namespace {

// Catmull-Rom interpolation on a uniform grid.
double cubic_at(const std::vector<double>& y, double x0, double h, double x)
{
    const int n = static_cast<int>(y.size());
    double u = (x - x0) / h;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 1, n - 3);
    double t = u - i;
    double p0 = y[i - 1], p1 = y[i], p2 = y[i + 1], p3 = y[i + 2];
    return p1 + 0.5 * t * (p2 - p0 + t * (2 * p0 - 5 * p1 + 4 * p2 - p3 + t * (3 * (p1 - p2) + p3 - p0)));
}

struct Predicted {
    cplx plus, minus;
    double center_plus, center_minus;
};

Predicted predict(const KGSolver& solver, const LinePhaseFn& phases, const WaveState& pk,
                  const Vec3& center)
{
    const SlabGrid& g = solver.grid();
    const int n = g.n;
    const Vec3 nu = pk.nu;
    const Vec3 perp(-nu.y(), nu.x(), 0.0);
    const double dA = g.dx() * g.dx();
    // Transverse samples covering the packet support.
    const double reach = 8.0 * pk.sigma + 4.0 * g.dx();
    const double h = g.dx();
    const double s0 = center.dot(perp) - reach;
    const int ns = static_cast<int>(std::ceil(2.0 * reach / h)) + 1;
    std::vector<double> tp(ns), tm(ns);
    for (int k = 0; k < ns; ++k) {
        Vec3 base = (s0 + k * h) * perp;
        auto pr = phases(base, nu);
        tp[k] = pr.first;
        tm[k] = pr.second;
    }
    const bool axis_aligned = std::abs(std::abs(nu.x()) - 1.0) < 1e-14 ||
                              std::abs(std::abs(nu.y()) - 1.0) < 1e-14;
    Predicted out{cplx(0.0), cplx(0.0), 0.0, 0.0};
    auto pc = phases(center - center.dot(nu) * nu, nu);
    out.center_plus = pc.first;
    out.center_minus = pc.second;
    const auto& amp = pk.plus;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            std::size_t k = static_cast<std::size_t>(j) * n + i;
            double rho = std::norm(amp[k]) + std::norm(pk.minus[k]);
            if (rho < 1e-30) continue;
            Vec3 x(g.coord(i), g.coord(j), 0.0);
            double s = x.dot(perp);
            if (s < s0 + h || s > s0 + (ns - 3) * h) continue;
            double a, b;
            if (axis_aligned) {
                int idx = static_cast<int>(std::lround((s - s0) / h));
                a = tp[idx];
                b = tm[idx];
            } else {
                a = cubic_at(tp, s0, h, s);
                b = cubic_at(tm, s0, h, s);
            }
            out.plus += std::polar(rho * dA, a);
            out.minus += std::polar(rho * dA, b);
        }
    return out;
}

}  // namespace

PhaseMeasurement scattering_phase_measurement(const KGSolver& solver, const LinePhaseFn& phases,
                                              const MeasurementSetup& setup, double v)
{
    PhaseMeasurement m;
    m.v = v;
    const double dA = solver.grid().dx() * solver.grid().dx();
    double worst_mag = 1.0;

    auto one = [&](bool plus, double& measured, double& predicted) {
        WaveState in = solver.packet(setup.center, setup.nu, v, setup.sigma, plus);
        WaveState out = solver.scatter(in);
        const auto& a = plus ? out.plus : out.minus;
        const auto& b = plus ? in.plus : in.minus;
        cplx o = KGSolver::inner(a, b, dA);
        Predicted p = predict(solver, phases, in, setup.center);
        cplx op = plus ? p.plus : p.minus;
        double anchor = plus ? p.center_plus : p.center_minus;
        double pa = anchor + wrap_centered(std::arg(op) - anchor);
        double d = wrap_centered(std::arg(o) - std::arg(op));
        measured = pa + d;
        predicted = pa;
        worst_mag = std::min(worst_mag, std::abs(o));
        return std::abs(d);
    };

    double e1 = one(true, m.theta_plus_measured, m.theta_plus_predicted);
    double e2 = 0.0;
    if (setup.measure_minus) e2 = one(false, m.theta_minus_measured, m.theta_minus_predicted);
    m.abs_err = std::max(e1, e2);
    m.overlap_mag = worst_mag;
    if (worst_mag < 0.5)
        throw Error(ErrorKind::InsufficientOverlap,
                    "overlap magnitude " + std::to_string(worst_mag) + " at v = " + std::to_string(v));
    return m;
}

void fit_slope(SolverRun& run, double floor)
{
    std::vector<double> lx, ly;
    for (const auto& r : run.rows) {
        if (r.abs_err > floor) {
            lx.push_back(std::log(r.v));
            ly.push_back(std::log(r.abs_err));
        }
    }
    run.degenerate = lx.size() < run.rows.size() || lx.size() < 3;
    if (lx.size() < 2) {
        run.slope = run.slope_lo = run.slope_hi = 0.0;
        run.degenerate = true;
        return;
    }
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    run.slope = sxy / sxx;
    double rss = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        double e = ly[i] - (my + run.slope * (lx[i] - mx));
        rss += e * e;
    }
    // two-sided 95% t quantiles for 1..8 degrees of freedom
    static const double tq[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306};
    int dof = static_cast<int>(n) - 2;
    double half = 0.0;
    if (dof >= 1) {
        double se = std::sqrt(rss / dof / sxx);
        half = (dof <= 8 ? tq[dof - 1] : 1.96) * se;
    }
    run.slope_lo = run.slope - half;
    run.slope_hi = run.slope + half;
}

SolverRun convergence_study(const SolverScene& scene, const SolverOptions& opt,
                            const LinePhaseFn& phases, const MeasurementSetup& setup,
                            const std::vector<double>& v_list)
{
    SolverRun run;
    KGSolver solver(scene, opt);
    for (double v : v_list) {
        double lambda = 2.0 * kPi / v;
        if (lambda / opt.grid.dx() < 6.0)
            throw Error(ErrorKind::InvalidArgument,
                        "grid resolves fewer than 6 points per wavelength at v = " +
                            std::to_string(v));
        run.rows.push_back(scattering_phase_measurement(solver, phases, setup, v));
    }
    fit_slope(run);
    return run;
}

void write_snapshot(const std::string& path, const WaveState& s)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
    const char magic[4] = {'K', 'G', 'W', '1'};
    std::uint32_t nx = static_cast<std::uint32_t>(s.grid.n), ny = nx, nc = 2;
    double dx = s.grid.dx(), dy = dx;
    f.write(magic, 4);
    f.write(reinterpret_cast<const char*>(&nx), 4);
    f.write(reinterpret_cast<const char*>(&ny), 4);
    f.write(reinterpret_cast<const char*>(&nc), 4);
    f.write(reinterpret_cast<const char*>(&dx), 8);
    f.write(reinterpret_cast<const char*>(&dy), 8);
    for (const auto* ch : {&s.plus, &s.minus})
        for (const auto& z : *ch) {
            float re = static_cast<float>(z.real()), im = static_cast<float>(z.imag());
            f.write(reinterpret_cast<const char*>(&re), 4);
            f.write(reinterpret_cast<const char*>(&im), 4);
        }
}

WaveState read_snapshot(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
    char magic[4];
    std::uint32_t nx, ny, nc;
    double dx, dy;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&nx), 4);
    f.read(reinterpret_cast<char*>(&ny), 4);
    f.read(reinterpret_cast<char*>(&nc), 4);
    f.read(reinterpret_cast<char*>(&dx), 8);
    f.read(reinterpret_cast<char*>(&dy), 8);
    if (!f || std::memcmp(magic, "KGW1", 4) != 0 || nx != ny || nc != 2)
        throw Error(ErrorKind::Io, "bad snapshot header in " + path);
    WaveState s;
    s.grid.n = static_cast<int>(nx);
    s.grid.extent = dx * nx;
    for (auto* ch : {&s.plus, &s.minus}) {
        ch->resize(static_cast<std::size_t>(nx) * ny);
        for (auto& z : *ch) {
            float re, im;
            f.read(reinterpret_cast<char*>(&re), 4);
            f.read(reinterpret_cast<char*>(&im), 4);
            z = cplx(re, im);
        }
    }
    if (!f) throw Error(ErrorKind::Io, "truncated snapshot " + path);
    return s;
}

}  // namespace kgs
