#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "kgscatter/hm_scattering.hpp"
#include "kgscatter/kg_solver.hpp"
#include "test_util.hpp"

using namespace kgs;
using namespace kgs::testing;

namespace {

SolverOptions small_grid(int n = 64, double extent = 16.0, double dt = 0.01)
{
    SolverOptions o;
    o.grid.n = n;
    o.grid.extent = extent;
    o.dt = dt;
    return o;
}

double max_diff(const WaveState& a, const WaveState& b)
{
    double d = 0.0;
    for (std::size_t k = 0; k < a.plus.size(); ++k) {
        d = std::max(d, std::abs(a.plus[k] - b.plus[k]));
        d = std::max(d, std::abs(a.minus[k] - b.minus[k]));
    }
    return d;
}

WaveState mixed_packet(const KGSolver& s, const Vec3& c, const Vec3& nu, double v, double sigma)
{
    WaveState a = s.packet(c, nu, v, sigma, true);
    WaveState b = s.packet(c, nu, -v, sigma, false);
    for (std::size_t k = 0; k < a.minus.size(); ++k) a.minus[k] = 0.5 * b.minus[k];
    return a;
}

// theta_+ = int A.nu - int A0, theta_- = -(int A.nu + int A0) by quadrature
LinePhaseFn quadrature_phases(const VectorPotential& A, const ElectricPotential& A0)
{
    return [A, A0](const Vec3& x, const Vec3& nu) {
        PhasePair p = hm_phase(A, A0, LineQuery{Line{x, nu}, {}}, 1e-11);
        return std::make_pair(p.theta_plus, p.theta_minus);
    };
}

cplx kI_test() { return cplx(0.0, 1.0); }

}  // namespace

TEST_SUITE("kg_solver")
{
    TEST_CASE("free step basics")
    {
        SolverScene scene;
        KGSolver s(scene, small_grid());
        WaveState p = mixed_packet(s, Vec3(1, -2, 0), Vec3(1, 1, 0), 1.5, 1.0);

        WaveState q = p;
        s.free_step(q, 0.0);
        CHECK(max_diff(p, q) < 1e-14);

        WaveState a = p, b = p;
        s.free_step(a, 0.6);
        s.free_step(b, 0.3);
        s.free_step(b, 0.3);
        CHECK(max_diff(a, b) < 1e-14);
        CHECK(std::abs(a.norm2() - p.norm2()) < 1e-13);
        CHECK(std::abs(p.norm2() - 1.25) < 1e-8);
        CHECK(a.t == doctest::Approx(0.6));
    }

    TEST_CASE("plane wave phase advance")
    {
        SolverScene scene;
        scene.mass = 0.7;
        SolverOptions o = small_grid();
        KGSolver s(scene, o);
        const double k0 = 2.0 * M_PI / o.grid.extent * 5, k1 = -2.0 * M_PI / o.grid.extent * 3;
        WaveState w = s.packet(Vec3::Zero(), Vec3::UnitX(), 0.0, 1.0, true);
        for (int j = 0; j < o.grid.n; ++j)
            for (int i = 0; i < o.grid.n; ++i) {
                std::size_t k = static_cast<std::size_t>(j) * o.grid.n + i;
                cplx e = std::polar(1.0, k0 * o.grid.coord(i) + k1 * o.grid.coord(j));
                w.plus[k] = e;
                w.minus[k] = 2.0 * e;
            }
        WaveState u = w;
        const double dt = 0.37;
        s.free_step(u, dt);
        const double om = std::sqrt(k0 * k0 + k1 * k1 + 0.49);
        double err = 0.0;
        for (std::size_t k = 0; k < w.plus.size(); ++k) {
            err = std::max(err, std::abs(u.plus[k] - w.plus[k] * std::polar(1.0, -om * dt)));
            err = std::max(err, std::abs(u.minus[k] - w.minus[k] * std::polar(1.0, om * dt)));
        }
        CHECK(err < 1e-12);
    }

    TEST_CASE("interaction step without potentials is the free step")
    {
        SolverScene scene;
        KGSolver s(scene, small_grid());
        WaveState p = mixed_packet(s, Vec3(0.5, 0, 0), Vec3(0.3, -1, 0), 2.0, 1.2);
        WaveState a = p, b = p;
        s.interaction_step(a, 0.05);
        s.free_step(b, 0.05);
        CHECK(max_diff(a, b) < 1e-14);
        WaveState c = p, d = p;
        s.evolve(c, 1.0);
        s.free_step(d, 1.0);
        CHECK(max_diff(c, d) < 1e-13);
    }

    TEST_CASE("constant electric potential against the exact two-level solution")
    {
        // Per Fourier mode, i d/dt (phi, phi_t) = [[0, i], [-i (B0^2 - c^2), 2c]] (phi, phi_t);
        // the eigenvalues c + B0 and c - B0 are the free energies +-B0 shifted by the same c.
        const double c = 0.4, t = 1.3, m = 0.5;
        auto exact = [&](double kx, double ky, cplx p0, cplx m0) {
            const double b0 = std::sqrt(kx * kx + ky * ky + m * m);
            cplx f = (p0 + m0) / (std::sqrt(2.0) * b0), ft = (p0 - m0) / (kI_test() * std::sqrt(2.0));
            const double l1 = c + b0, l2 = c - b0;
            cplx a = (kI_test() * ft - l2 * f) / (l1 - l2), b = f - a;
            cplx e1 = std::polar(1.0, -l1 * t), e2 = std::polar(1.0, -l2 * t);
            cplx ph = a * e1 + b * e2;
            cplx pht = -kI_test() * (l1 * a * e1 + l2 * b * e2);
            return std::make_pair((b0 * ph + kI_test() * pht) / std::sqrt(2.0),
                                  (b0 * ph - kI_test() * pht) / std::sqrt(2.0));
        };
        SolverScene scene;
        scene.a0 = [c](const Vec3&) { return c; };
        scene.mass = m;
        for (int mode : {0, 1}) {
            std::vector<double> errs;
            for (double dt : {0.02, 0.01}) {
                SolverOptions o = small_grid(32, 16.0, dt);
                KGSolver s(scene, o);
                const double kx = mode ? 2.0 * M_PI / o.grid.extent * 5 : 0.0;
                const double ky = mode ? -2.0 * M_PI / o.grid.extent * 3 : 0.0;
                const cplx p0(0.8, 0.1), m0(-0.2, 0.3);
                WaveState w = s.packet(Vec3::Zero(), Vec3::UnitX(), 0.0, 1.0, true);
                for (int j = 0; j < o.grid.n; ++j)
                    for (int i = 0; i < o.grid.n; ++i) {
                        std::size_t k = static_cast<std::size_t>(j) * o.grid.n + i;
                        cplx e = std::polar(1.0, kx * o.grid.coord(i) + ky * o.grid.coord(j));
                        w.plus[k] = p0 * e;
                        w.minus[k] = m0 * e;
                    }
                s.evolve(w, t);
                auto [pe, me] = exact(kx, ky, p0, m0);
                double err = 0.0;
                for (int j = 0; j < o.grid.n; ++j)
                    for (int i = 0; i < o.grid.n; ++i) {
                        std::size_t k = static_cast<std::size_t>(j) * o.grid.n + i;
                        cplx e = std::polar(1.0, kx * o.grid.coord(i) + ky * o.grid.coord(j));
                        err = std::max(err, std::abs(w.plus[k] - pe * e));
                        err = std::max(err, std::abs(w.minus[k] - me * e));
                    }
                errs.push_back(err);
            }
            MESSAGE("mode " << mode << " errors " << errs[0] << " " << errs[1]);
            CHECK(errs[1] < 1e-4);
            CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.1));
        }
    }

    TEST_CASE("Strang splitting is second order")
    {
        SolverScene scene;
        scene.a0 = make_gaussian_electric(Vec3(0.5, 0, 0), 1.5, 0.45);
        VectorPotential A = make_vortex_potential(Vec3(-0.5, 0.3, 0), Vec3::UnitZ(), 1.0, 0.8);
        scene.a = A.eval;
        auto run = [&](double dt) {
            KGSolver s(scene, small_grid(64, 16.0, dt));
            WaveState p = mixed_packet(s, Vec3(-2, 0, 0), Vec3::UnitX(), 1.0, 1.0);
            s.evolve(p, 2.0);
            return p;
        };
        WaveState ref = run(0.2 / 32);
        double e1 = max_diff(run(0.2), ref);
        double e2 = max_diff(run(0.1), ref);
        double e3 = max_diff(run(0.05), ref);
        MESSAGE("splitting errors " << e1 << " " << e2 << " " << e3);
        CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.25));
        CHECK(e2 / e3 == doctest::Approx(4.0).epsilon(0.25));
    }

    TEST_CASE("energy drift per unit time")
    {
        SolverScene scene;
        scene.a0 = make_gaussian_electric(Vec3::Zero(), 1.0, 0.5);
        scene.a = make_vortex_potential(Vec3::Zero(), Vec3::UnitZ(), 1.0, 0.5).eval;
        KGSolver s(scene, small_grid(64, 16.0, 0.01));
        WaveState far = mixed_packet(s, Vec3(-6, 0, 0), Vec3::UnitX(), 1.5, 0.7);
        CHECK(s.energy(far) == doctest::Approx(far.norm2()).epsilon(1e-5));

        WaveState p = mixed_packet(s, Vec3(-3, 0.2, 0), Vec3::UnitX(), 1.5, 1.0);
        const double e0 = s.energy(p);
        s.evolve(p, 4.0);
        const double drift = std::abs(s.energy(p) - e0) / e0 / 4.0;
        MESSAGE("energy drift per unit time " << drift);
        CHECK(drift < 1e-6);
    }

    TEST_CASE("threaded interaction update matches the serial reference")
    {
        const std::size_t n = 4096;
        std::mt19937_64 rng(11);
        std::normal_distribution<double> g;
        std::vector<cplx> phit(n), wphi(n);
        std::vector<double> a0(n);
        for (std::size_t k = 0; k < n; ++k) {
            phit[k] = cplx(g(rng), g(rng));
            wphi[k] = cplx(g(rng), g(rng));
            a0[k] = (k % 7 == 0) ? 0.0 : 0.3 * g(rng);
        }
        for (const std::vector<double>& a : {a0, std::vector<double>{}}) {
            auto x = phit, y = phit;
            interaction_update_serial(x, wphi, a, 0.01);
            interaction_update(y, wphi, a, 0.01);
            double d = 0.0;
            for (std::size_t k = 0; k < n; ++k) d = std::max(d, std::abs(x[k] - y[k]));
            CHECK(d == 0.0);
        }
        // a0 -> 0 limit of the exact substep
        std::vector<cplx> x = phit, y = phit;
        std::vector<double> tiny(n, 1e-9);
        interaction_update_serial(x, wphi, {}, 0.01);
        interaction_update_serial(y, wphi, tiny, 0.01);
        double d = 0.0;
        for (std::size_t k = 0; k < n; ++k) d = std::max(d, std::abs(x[k] - y[k]));
        CHECK(d < 1e-10);
    }

    TEST_CASE("smooth barrier reflects the packet")
    {
        auto past_wall = [](const KGSolver& s, const WaveState& p, double& cx) {
            const SlabGrid& g = s.grid();
            double past = 0.0, tot = 0.0;
            cx = 0.0;
            for (int j = 0; j < g.n; ++j)
                for (int i = 0; i < g.n; ++i) {
                    std::size_t k = static_cast<std::size_t>(j) * g.n + i;
                    double r = std::norm(p.plus[k]) + std::norm(p.minus[k]);
                    double x = g.coord(i);
                    tot += r;
                    cx += r * x;
                    if (x > 1.0 && x < 8.0) past += r;
                }
            cx /= tot;
            return past / tot;
        };
        SolverOptions o = small_grid(128, 24.0, 0.01);
        o.barrier_height = 50.0;
        o.barrier_width = 0.3;
        double cx6, cx8;
        for (bool wall : {false, true}) {
            SolverScene scene;
            if (wall) scene.obstacle_distance = [](const Vec3& x) { return -x.x(); };
            KGSolver s(scene, o);
            WaveState p = s.packet(Vec3(-5, 0, 0), Vec3::UnitX(), 1.0, 0.7, true);
            const double e0 = s.energy(p);
            s.evolve(p, 6.0);
            past_wall(s, p, cx6);
            s.evolve(p, 2.0);
            double past = past_wall(s, p, cx8);
            CHECK(std::abs(s.energy(p) - e0) < 1e-4 * e0);
            if (wall) {
                CHECK(past < 5e-3);
                CHECK(cx8 < cx6);
            } else {
                CHECK(past > 0.3);
                CHECK(cx8 > cx6);
            }
        }
    }

    TEST_CASE("zero potentials measure zero phases")
    {
        SolverScene scene;
        SolverOptions o = small_grid(128, 32.0, 0.05);
        o.T = 10.0;
        KGSolver s(scene, o);
        MeasurementSetup su;
        su.center = Vec3(0, 0.5, 0);
        auto none = [](const Vec3&, const Vec3&) { return std::make_pair(0.0, 0.0); };
        PhaseMeasurement m = scattering_phase_measurement(s, none, su, 2.0);
        CHECK(std::abs(m.theta_plus_measured) < 1e-8);
        CHECK(std::abs(m.theta_minus_measured) < 1e-8);
        CHECK(m.overlap_mag > 0.999);
    }

    TEST_CASE("weak Gaussian electric potential at v = 8m")
    {
        ElectricPotential E = make_gaussian_electric(Vec3::Zero(), 1.0, 0.01);
        SolverScene scene;
        scene.a0 = E.eval;
        SolverOptions o = small_grid(256, 32.0, 0.02);
        o.T = 12.0;
        KGSolver s(scene, o);
        MeasurementSetup su;
        su.center = Vec3(0, 0.3, 0);
        const double v = 8.0 * scene.mass;
        PhaseMeasurement m =
            scattering_phase_measurement(s, quadrature_phases(zero_potential(), E), su, v);
        const double pred = -std::sqrt(M_PI) * 0.01 * std::exp(-0.09);
        CHECK(m.theta_plus_predicted == doctest::Approx(pred).epsilon(0.02));
        CHECK(m.theta_plus_measured == doctest::Approx(m.theta_plus_predicted).epsilon(0.02));
        CHECK(m.theta_minus_measured == doctest::Approx(m.theta_minus_predicted).epsilon(0.02));
    }

    TEST_CASE("measured phases are gauge invariant")
    {
        auto [G, lam] = make_gaussian_gauge(Vec3(0.4, -0.2, 0), 1.0, 0.7);
        MeasurementSetup su;
        su.center = Vec3(0, 0.3, 0);
        const double v = 4.0;
        auto none = [](const Vec3&, const Vec3&) { return std::make_pair(0.0, 0.0); };
        auto measure = [&](bool gauged, double dt) {
            SolverOptions o = small_grid(256, 32.0, dt);
            o.T = 12.0;
            SolverScene scene;
            if (gauged) scene.a = G.eval;
            KGSolver s(scene, o);
            PhaseMeasurement m = scattering_phase_measurement(s, none, su, v);
            return std::max(std::abs(m.theta_plus_measured), std::abs(m.theta_minus_measured));
        };
        CHECK(measure(false, 0.02) <= 1e-8);
        // the residual of the gauged scene is time-splitting error and vanishes with dt
        const double r1 = measure(true, 0.02), r2 = measure(true, 0.01);
        MESSAGE("gauge residuals " << r1 << " " << r2);
        CHECK(r1 < 2e-4);
        CHECK(r2 < r1 / 3.0);
        CHECK(r2 < 2e-5);
    }

    TEST_CASE("decoupling of electric and magnetic phases")
    {
        ElectricPotential E = make_gaussian_electric(Vec3::Zero(), 1.0, 0.05);
        VectorPotential A = make_vortex_potential(Vec3::Zero(), Vec3::UnitZ(), 1.0, 0.1);
        SolverOptions o = small_grid(256, 32.0, 0.02);
        o.T = 12.0;
        MeasurementSetup su;
        su.center = Vec3(0, 0.6, 0);
        const double v = 4.0;

        SolverScene el;
        el.a0 = E.eval;
        KGSolver se(el, o);
        PhaseMeasurement me = scattering_phase_measurement(se, quadrature_phases(zero_potential(), E), su, v);

        SolverScene mg;
        mg.a = A.eval;
        KGSolver sm(mg, o);
        PhaseMeasurement mm = scattering_phase_measurement(sm, quadrature_phases(A, zero_electric()), su, v);

        const double ie = std::abs(me.theta_plus_predicted), im = std::abs(mm.theta_plus_predicted);
        REQUIRE(ie > 0.02);
        REQUIRE(im > 0.02);
        // electric only: theta_+ - theta_- vanishes; magnetic only: theta_+ + theta_- vanishes
        CHECK(std::abs(me.theta_plus_measured - me.theta_minus_measured) < 0.05 * ie);
        CHECK(std::abs(mm.theta_plus_measured + mm.theta_minus_measured) < 0.05 * im);
        CHECK(mm.theta_plus_measured == doctest::Approx(mm.theta_plus_predicted).epsilon(0.05));

        // reversing the direction flips the magnetic phase and keeps the electric one
        MeasurementSetup back = su;
        back.nu = -Vec3::UnitX();
        PhaseMeasurement mr = scattering_phase_measurement(sm, quadrature_phases(A, zero_electric()), back, v);
        CHECK(mr.theta_plus_measured == doctest::Approx(-mm.theta_plus_measured).epsilon(0.05));
        CHECK(mr.theta_minus_measured == doctest::Approx(-mm.theta_minus_measured).epsilon(0.05));
        PhaseMeasurement er = scattering_phase_measurement(se, quadrature_phases(zero_potential(), E), back, v);
        CHECK(er.theta_plus_measured == doctest::Approx(me.theta_plus_measured).epsilon(0.05));
    }

    TEST_CASE("slope fit")
    {
        SolverRun run;
        for (double v : {2.0, 4.0, 8.0, 16.0}) {
            PhaseMeasurement m;
            m.v = v;
            m.abs_err = 0.3 / v;
            run.rows.push_back(m);
        }
        fit_slope(run);
        CHECK(run.slope == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(run.slope_hi - run.slope_lo < 1e-10);
        CHECK_FALSE(run.degenerate);

        run.rows[1].abs_err *= 1.2;
        fit_slope(run);
        CHECK(run.slope_lo < run.slope);
        CHECK(run.slope < run.slope_hi);

        for (auto& r : run.rows) r.abs_err = 1e-12;
        fit_slope(run);
        CHECK(run.degenerate);
    }

    TEST_CASE("convergence study without potentials is degenerate")
    {
        SolverScene scene;
        SolverOptions o = small_grid(256, 32.0, 0.05);
        o.T = 8.0;
        MeasurementSetup su;
        su.measure_minus = false;
        auto none = [](const Vec3&, const Vec3&) { return std::make_pair(0.0, 0.0); };
        SolverRun run = convergence_study(scene, o, none, su, {0.5, 1.0, 2.0});
        CHECK(run.rows.size() == 3);
        for (const auto& r : run.rows) CHECK(r.abs_err < 1e-8);
        CHECK(run.degenerate);

        CHECK(kind_of([&] { convergence_study(scene, o, none, su, {0.5, 40.0}); }) ==
              ErrorKind::InvalidArgument);
    }

    TEST_CASE("error kinds")
    {
        SolverScene scene;
        CHECK(kind_of([&] { KGSolver(scene, small_grid(63)); }) == ErrorKind::InvalidArgument);
        CHECK(kind_of([&] { KGSolver(scene, small_grid(4)); }) == ErrorKind::InvalidArgument);
        CHECK(kind_of([&] { KGSolver(scene, small_grid(64, 16.0, 0.0)); }) ==
              ErrorKind::InvalidArgument);

        SolverScene hot;
        hot.a0 = [](const Vec3&) { return 20.0; };
        CHECK(kind_of([&] { KGSolver(hot, small_grid(64, 16.0, 0.01)); }) ==
              ErrorKind::StabilityViolation);

        SolverScene wild;
        wild.a = make_vortex_potential(Vec3::Zero(), Vec3::UnitZ(), 2.0, 30.0).eval;
        {
            KGSolver s(wild, small_grid(64, 16.0, 0.5));
            WaveState p = s.packet(Vec3::Zero(), Vec3::UnitX(), 1.0, 1.0, true);
            CHECK(kind_of([&] { s.evolve(p, 5.0); }) == ErrorKind::StabilityViolation);
        }

        {
            SolverOptions o = small_grid(64, 16.0, 0.05);
            o.T = 30.0;
            KGSolver s(scene, o);
            WaveState p = s.packet(Vec3::Zero(), Vec3::UnitX(), 2.0, 1.0, true);
            CHECK(kind_of([&] { s.scatter(p); }) == ErrorKind::PacketEscaped);
        }

        {
            SolverScene blocked;
            blocked.obstacle_distance = [](const Vec3& x) { return x.norm() - 2.5; };
            SolverOptions o = small_grid(128, 32.0, 0.02);
            o.T = 12.0;
            o.escape_tol = 1e-3;
            KGSolver s(blocked, o);
            MeasurementSetup su;
            auto none = [](const Vec3&, const Vec3&) { return std::make_pair(0.0, 0.0); };
            CHECK(kind_of([&] { scattering_phase_measurement(s, none, su, 2.0); }) ==
                  ErrorKind::InsufficientOverlap);
        }
    }

    TEST_CASE("snapshot round trip")
    {
        SolverScene scene;
        KGSolver s(scene, small_grid(32, 8.0));
        WaveState p = mixed_packet(s, Vec3(0.5, 0.5, 0), Vec3::UnitY(), 1.0, 1.0);
        auto dir = std::filesystem::temp_directory_path();
        std::string path = (dir / "kgs_snapshot_test.bin").string();
        write_snapshot(path, p);
        CHECK(std::filesystem::file_size(path) == 32 + 2 * p.grid.size() * 8);
        WaveState q = read_snapshot(path);
        CHECK(q.grid.n == p.grid.n);
        CHECK(q.grid.dx() == doctest::Approx(p.grid.dx()));
        CHECK(max_diff(p, q) < 1e-6);

        {
            std::ofstream f(path, std::ios::binary);
            f << "KGW2 not a snapshot at all, padding padding padding";
        }
        CHECK(kind_of([&] { read_snapshot(path); }) == ErrorKind::Io);
        write_snapshot(path, p);
        std::filesystem::resize_file(path, 100);
        CHECK(kind_of([&] { read_snapshot(path); }) == ErrorKind::Io);
        std::filesystem::remove(path);
        CHECK(kind_of([&] { read_snapshot(path); }) == ErrorKind::Io);
    }
}
