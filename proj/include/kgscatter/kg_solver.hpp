#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kgscatter/potentials.hpp"
#include "kgscatter/vec.hpp"

namespace kgs {

using cplx = std::complex<double>;

// Periodic square grid on [-extent/2, extent/2)^2 in the plane z = 0.
struct SlabGrid {
    int n = 512;
    double extent = 32.0;

    double dx() const { return extent / n; }
    double coord(int i) const { return -0.5 * extent + i * dx(); }
    std::size_t size() const { return static_cast<std::size_t>(n) * n; }
};

struct WaveState {
    SlabGrid grid;
    std::vector<cplx> plus;   // diagonal component with energy +B0
    std::vector<cplx> minus;  // diagonal component with energy -B0
    double t = 0.0;
    double v = 0.0;
    Vec3 nu = Vec3::UnitX();
    double sigma = 1.0;
    double m_eff = 1.0;

    double norm2() const;
};

enum class BarrierMode { None, Smooth, Hard };

struct SolverScene {
    ScalarField a0;   // empty means zero
    VecField a;       // empty means zero
    std::function<double(const Vec3&)> obstacle_distance;  // empty means no obstacle
    double mass = 0.5;
    double p3 = 0.0;  // conserved momentum along z

    double m_eff() const;
};

struct SolverOptions {
    SlabGrid grid;
    double dt = 0.01;
    double T = 20.0;
    BarrierMode barrier = BarrierMode::Smooth;
    double barrier_height = 400.0;  // added to B(A)^2 inside the obstacle slice
    double barrier_width = 0.1;
    double absorber_width = 0.0;
    double absorber_strength = 2.0;
    double escape_band = 0.05;     // fraction of extent checked for leaked mass
    double escape_tol = 1e-6;
};

class KGSolver {
public:
    KGSolver(const SolverScene& scene, const SolverOptions& opt);
    ~KGSolver();
    KGSolver(const KGSolver&) = delete;
    KGSolver& operator=(const KGSolver&) = delete;

    const SlabGrid& grid() const { return opt_.grid; }
    const SolverOptions& options() const { return opt_; }
    double m_eff() const { return m_eff_; }

    // Gaussian packet with |phi|^2 of standard deviation sigma, carrier v*nu, in one component.
    WaveState packet(const Vec3& center, const Vec3& nu, double v, double sigma,
                     bool plus_component) const;

    void free_step(WaveState& s, double dt) const;
    // One Strang step: half free, exact interaction substep, half free.
    void interaction_step(WaveState& s, double dt) const;
    // exp(-i t H) with Strang steps of size <= dt.
    void evolve(WaveState& s, double t) const;

    // <a, b> = sum a conj(b) dA, per component.
    static cplx inner(const std::vector<cplx>& a, const std::vector<cplx>& b, double dA);
    double leaked_fraction(const WaveState& s) const;
    // Field energy |B(A) phi|^2 + |d_t phi|^2, the norm conserved by the interacting dynamics.
    // Equals norm2() wherever the potentials vanish.
    double energy(const WaveState& s) const;

    // Finite-time scattering operator exp(i tau H0) exp(-2 i tau H) exp(i tau H0), tau = T/2.
    WaveState scatter(const WaveState& in) const;

    const std::vector<double>& potential_w() const { return w_; }
    const std::vector<double>& a0_grid() const { return a0_; }

private:
    struct Plans;
    struct StepTables;
    struct Scratch;
    void to_fourier(const std::vector<cplx>& in, std::vector<cplx>& out) const;
    void to_real(const std::vector<cplx>& in, std::vector<cplx>& out) const;
    StepTables make_tables(double dt) const;
    void free_phase_fourier(std::vector<cplx>& up, std::vector<cplx>& um, double dt) const;
    void apply_phase(std::vector<cplx>& up, std::vector<cplx>& um,
                     const std::vector<cplx>& e) const;
    void apply_w(const std::vector<cplx>& up, const std::vector<cplx>& um, Scratch& sc) const;
    double energy_fourier(const std::vector<cplx>& up, const std::vector<cplx>& um,
                          Scratch& sc) const;
    void interaction_fourier(std::vector<cplx>& up, std::vector<cplx>& um, const StepTables& tab,
                             Scratch& sc) const;

    SolverScene scene_;
    SolverOptions opt_;
    double m_eff_;
    std::vector<double> kx_, b0_;     // kx per index, B0 per grid point
    std::vector<double> a0_, ax_, ay_, w_;  // sampled fields; w = |A|^2 - A0^2 + barrier
    std::vector<double> mask_, absorb_;
    bool magnetic_ = false;
    bool electric_ = false;
    std::unique_ptr<Plans> plans_;
};

// Serial reference for the per-point interaction update, used to check the threaded kernel.
void interaction_update_serial(std::vector<cplx>& phit, const std::vector<cplx>& wphi,
                               const std::vector<double>& a0, double dt);
void interaction_update(std::vector<cplx>& phit, const std::vector<cplx>& wphi,
                        const std::vector<double>& a0, double dt);

struct PhaseMeasurement {
    double v = 0.0;
    double theta_plus_measured = 0.0;
    double theta_minus_measured = 0.0;
    double theta_plus_predicted = 0.0;
    double theta_minus_predicted = 0.0;
    double abs_err = 0.0;  // max over the two components of the wrapped phase difference
    double overlap_mag = 0.0;
};

struct MeasurementSetup {
    Vec3 center = Vec3::Zero();  // packet center at t = 0, line base point
    Vec3 nu = Vec3::UnitX();
    double sigma = 1.0;
    bool measure_minus = true;
};

// Line phase used for the prediction: theta_+ and theta_- for the line through x with direction nu.
using LinePhaseFn = std::function<std::pair<double, double>(const Vec3& x, const Vec3& nu)>;

PhaseMeasurement scattering_phase_measurement(const KGSolver& solver, const LinePhaseFn& phases,
                                              const MeasurementSetup& setup, double v);

struct SolverRun {
    std::vector<PhaseMeasurement> rows;
    double slope = 0.0;
    double slope_lo = 0.0;
    double slope_hi = 0.0;
    bool degenerate = false;
};

// Fits log(err) = a + slope log(v); 95% interval from the t distribution.
void fit_slope(SolverRun& run, double floor = 1e-9);

SolverRun convergence_study(const SolverScene& scene, const SolverOptions& opt,
                            const LinePhaseFn& phases, const MeasurementSetup& setup,
                            const std::vector<double>& v_list);

// 32-byte header "KGW1", u32 nx, u32 ny, u32 ncomp, f64 dx, f64 dy; complex64 payload.
void write_snapshot(const std::string& path, const WaveState& s);
WaveState read_snapshot(const std::string& path);

}  // namespace kgs
