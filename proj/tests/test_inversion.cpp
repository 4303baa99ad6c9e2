#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "kgscatter/inversion.hpp"
#include "kgscatter/lineflux.hpp"
#include "test_util.hpp"

using namespace kgs;
using namespace kgs::testing;

namespace {

PhasePair pair_of(double tp, double tm)
{
    PhasePair p;
    p.theta_plus = tp;
    p.theta_minus = tm;
    return p;
}

double gauss_a0(const Vec3& x) { return std::exp(-(x - Vec3(0.3, -0.2, 0)).squaredNorm() / 0.8); }

ElectricPotential gauss_electric(const Vec3& c, double w, double amp)
{
    return make_gaussian_electric(c, w, amp);
}

PhasePair phase_on(const VectorPotential& A, const ElectricPotential& A0, const Obstacle& obs,
                   const Line& l)
{
    return hm_phase(A, A0, LineQuery{l, obs.empty() ? HomologyLabel{} : classify_line(obs, l)});
}

}  // namespace

TEST_SUITE("inversion")
{
    TEST_CASE("decouple examples")
    {
        PhaseDataset d;
        d.nx = 1;
        d.ny = 2;
        const double sp = std::sqrt(M_PI), phi = 0.7;
        d.phases = {pair_of(-sp, -sp), pair_of(-sp + 1e-3, -sp - 1e-3)};
        DecoupledData r = decouple(d);
        CHECK(r.int_A0[0] == doctest::Approx(sp).epsilon(1e-15));
        CHECK(std::abs(r.int_A[0]) < 1e-16);
        CHECK(r.int_A[1] == doctest::Approx(1e-3).epsilon(1e-12));

        d.phases = {pair_of(phi, -phi), pair_of(phi, -phi)};
        r = decouple(d);
        CHECK(r.int_A[0] == doctest::Approx(phi).epsilon(1e-15));
        CHECK(std::abs(r.int_A0[0]) < 1e-16);

        d.phases = {pair_of(0.0, 0.0), pair_of(2.0, 0.0)};
        CHECK(kind_of([&] { decouple(d); }) == ErrorKind::UnwrapAmbiguity);
    }

    TEST_CASE("decoupled data equals direct line integrals")
    {
        VectorPotential A = make_vortex_potential(Vec3(0.2, 0, 0.1), Vec3(1, 2, 2).normalized(), 0.8, 0.6);
        ElectricPotential E = make_algebraic_electric(Vec3(-0.3, 0.1, 0), 1.0, 0.4, 3.0);
        PhaseDataset d;
        d.nu = Vec3(1, 1, 0).normalized();
        d.b1 = Vec3(-1, 1, 0).normalized();
        d.b2 = Vec3::UnitZ();
        d.nx = d.ny = 5;
        d.h = 0.4;
        std::vector<Line> lines;
        for (int i = 0; i < d.nx; ++i)
            for (int j = 0; j < d.ny; ++j) {
                Line l{(i - 2) * d.h * d.b1 + (j - 2) * d.h * d.b2, d.nu};
                lines.push_back(l);
                d.phases.push_back(hm_phase(A, E, LineQuery{l, {}}));
            }
        DecoupledData r = decouple(d);
        double worst = 0.0;
        for (std::size_t k = 0; k < lines.size(); ++k) {
            worst = std::max(worst, std::abs(r.int_A[k] - xray_A(A, lines[k])));
            worst = std::max(worst, std::abs(r.int_A0[k] - xray_A0(E, lines[k])));
        }
        CHECK(worst < 1e-10);
    }

    TEST_CASE("unwrapping")
    {
        const int nx = 9, ny = 7;
        std::vector<double> truth(nx * ny), wrapped(nx * ny);
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j) {
                truth[i * ny + j] = 0.9 * i - 0.7 * j + 0.1 * std::sin(i * j);
                wrapped[i * ny + j] = std::remainder(truth[i * ny + j], 2.0 * M_PI);
            }
        const int seed = 0;
        auto u = unwrap_phases(wrapped, nx, ny, seed);
        double worst = 0.0;
        for (int k = 0; k < nx * ny; ++k) worst = std::max(worst, std::abs(u[k] - truth[k]));
        CHECK(worst < 1e-12);

        // a different seed only moves the whole map by a multiple of 2 pi
        auto u2 = unwrap_phases(wrapped, nx, ny, nx * ny - 1);
        const double shift = u2[0] - u[0];
        CHECK(std::abs(shift / (2.0 * M_PI) - std::round(shift / (2.0 * M_PI))) < 1e-12);
        for (int k = 0; k < nx * ny; ++k) CHECK(u2[k] - u[k] == doctest::Approx(shift));

        for (auto& w : wrapped) w *= 3.0;
        CHECK(kind_of([&] { unwrap_phases(wrapped, nx, ny, seed); }) == ErrorKind::UnwrapAmbiguity);
        CHECK(kind_of([&] { unwrap_phases(wrapped, nx, ny + 1, seed); }) == ErrorKind::InvalidArgument);

        PhaseDataset d;
        d.nx = 2;
        d.ny = 2;
        d.phases = {pair_of(3.0, -3.0), pair_of(-3.1, 3.1), pair_of(3.1, -3.1), pair_of(3.0, -3.0)};
        std::vector<double> wts = {0.1, 0.2, 0.9, 0.3};
        PhaseDataset un = unwrap_dataset(d, &wts);
        CHECK(un.phases[2].theta_plus == doctest::Approx(3.1));
        CHECK(un.phases[1].theta_plus == doctest::Approx(2.0 * M_PI - 3.1));
        CHECK(un.phases[1].theta_minus == doctest::Approx(3.1 - 2.0 * M_PI));
        DecoupledData r = decouple(un);
        CHECK(r.int_A[1] == doctest::Approx(2.0 * M_PI - 3.1));
    }

    TEST_CASE("parallel backprojection matches the serial reference")
    {
        PlaneFrame f;
        SinogramSpec spec;
        spec.n_angles = 24;
        spec.n_offsets = 48;
        Sinogram s = sample_sinogram([](const Line& l) { return xray_A0(make_gaussian_electric(Vec3::Zero(), 1.0, 1.0), l); }, f, spec);
        auto q = ramp_filter(s);
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i < 200; ++i) pts.emplace_back(-2.0 + 0.02 * i, 1.5 - 0.013 * i);
        auto a = backproject(s, q, pts), b = backproject_serial(s, q, pts);
        for (std::size_t k = 0; k < pts.size(); ++k) CHECK(a[k] == b[k]);
    }

    TEST_CASE("electric potential by filtered backprojection")
    {
        ElectricPotential E = make_gaussian_electric(Vec3(0.3, -0.2, 0), std::sqrt(0.8), 1.0);
        PhaseSource src = scene_phase_source(zero_potential(), E);
        PlaneFrame plane;
        A0Options opt;
        ReconstructionGrid g = reconstruct_A0(src, plane, opt);
        CHECK(g.values.size() == 64u * 64u);
        const double err = relative_l2(g, 0, gauss_a0);
        MESSAGE("Gaussian relative L2 " << err);
        CHECK(err <= 0.05);

        CHECK(reconstruct_A0_at(src, Vec3(0.3, -0.2, 0), Vec3::UnitZ(), opt) ==
              doctest::Approx(1.0).epsilon(0.05));

        A0Options small = opt;
        small.tile = 16;
        ReconstructionGrid z = reconstruct_A0(scene_phase_source(zero_potential(), zero_electric()), plane, small);
        for (double v : z.values) CHECK(std::abs(v) <= 1e-3);

        // linearity
        ElectricPotential F = make_gaussian_electric(Vec3(-0.8, 0.5, 0), 0.6, -0.7);
        ReconstructionGrid gf = reconstruct_A0(scene_phase_source(zero_potential(), F), plane, small);
        ReconstructionGrid ge = reconstruct_A0(src, plane, small);
        ReconstructionGrid gs = reconstruct_A0(scene_phase_source(zero_potential(), E + F), plane, small);
        double worst = 0.0;
        for (std::size_t k = 0; k < gs.values.size(); ++k)
            worst = std::max(worst, std::abs(gs.values[k] - ge.values[k] - gf.values[k]));
        CHECK(worst < 1e-8);

        A0Options few = small;
        few.spec.n_angles = 15;
        CHECK(kind_of([&] { reconstruct_A0(src, plane, few); }) == ErrorKind::InsufficientAngles);
    }

    TEST_CASE("blocked planes")
    {
        Obstacle obs = unit_torus();
        PhaseSource src = scene_phase_source(zero_potential(), zero_electric());
        A0Options opt;
        opt.tile = 8;
        opt.spec.n_angles = 16;
        opt.spec.n_offsets = 16;
        opt.obstacle = &obs;
        PlaneFrame through;
        CHECK(kind_of([&] { reconstruct_A0(src, through, opt); }) == ErrorKind::PlaneBlocked);
        PlaneFrame above;
        above.center = Vec3(0, 0, 3.0);
        CHECK_NOTHROW(reconstruct_A0(src, above, opt));
    }

    TEST_CASE("magnetic field by differentiated backprojection")
    {
        const Vec3 axis = Vec3(0.3, -0.2, 1.0).normalized();
        VectorPotential A = make_vortex_potential(Vec3(0.1, 0.0, -0.1), axis, 0.7, 1.0);
        MagneticField B = make_vortex_field(Vec3(0.1, 0.0, -0.1), axis, 0.7, 1.0);
        PhaseSource src = scene_phase_source(A, zero_electric(), 1e-10);
        PlaneFrame plane;
        BOptions opt;
        opt.spec.n_angles = 48;
        opt.spec.n_offsets = 96;
        opt.tile = 20;
        opt.tile_half_width = 1.6;
        ReconstructionGrid g = reconstruct_B(src, plane, opt);
        const Vec3 e[3] = {plane.b1, plane.b2, plane.normal()};
        double worst = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double err = relative_l2(g, c, [&](const Vec3& x) { return B(x).dot(e[c]); });
            MESSAGE("component " << c << " relative L2 " << err);
            worst = std::max(worst, err);
        }
        CHECK(worst <= 0.10);
        const double div = reconstructed_divergence_ratio(src, plane, g, opt);
        MESSAGE("divergence ratio " << div);
        CHECK(div <= 0.05);

        BOptions zopt = opt;
        zopt.tile = 6;
        ReconstructionGrid z = reconstruct_B(scene_phase_source(zero_potential(), zero_electric()), plane, zopt);
        for (double v : z.values) CHECK(std::abs(v) <= 1e-3);

        // a compact pure gauge leaves the reconstruction unchanged
        auto [G, lam] = make_gaussian_gauge(Vec3(-0.2, 0.3, 0.1), 0.9, 0.8);
        auto pts = std::vector<std::pair<double, double>>{{0.0, 0.0}, {0.5, -0.4}, {-0.9, 0.2}};
        auto b0 = reconstruct_B_normal(src, plane, pts, opt);
        auto b1 = reconstruct_B_normal(scene_phase_source(A + G, zero_electric(), 1e-11), plane, pts, opt);
        for (std::size_t k = 0; k < pts.size(); ++k) CHECK(std::abs(b1[k] - b0[k]) < 1e-6);

        BOptions few = opt;
        few.spec.n_angles = 31;
        CHECK(kind_of([&] { reconstruct_B_normal(src, plane, pts, few); }) ==
              ErrorKind::MomentInversionIllposed);
    }

    TEST_CASE("fluxes modulo 2 pi and pi")
    {
        Obstacle obs = unit_torus();
        const Vec3 v = Vec3::UnitZ();
        const Line l1 = representative_lines(obs, {1}, v, 1, 5).front();
        const Line l0 = representative_lines(obs, {0}, v, 1, 5).front();
        SceneFlags free_flags{true, true};
        auto run = [&](double phi, const ElectricPotential& E) {
            VectorPotential A = make_ab_torus_potential(obs, 0, phi);
            return std::make_pair(phase_on(A, E, obs, l1), phase_on(A, E, obs, l0));
        };
        for (double phi : {M_PI / 3, M_PI, 2 * M_PI, 2 * M_PI + M_PI / 3}) {
            auto [p1, p0] = run(phi, zero_electric());
            FluxModResult r = recover_flux_mod(p1, p0, free_flags);
            CHECK(r.modulus == doctest::Approx(2 * M_PI));
            const double expect = std::fmod(phi, 2 * M_PI);
            const double d = std::remainder(r.value - expect, 2 * M_PI);
            CHECK(std::abs(d) < 1e-5);
            CHECK(r.value >= 0.0);
            CHECK(r.value < 2 * M_PI);
        }
        auto [a1, a0] = run(M_PI / 3, zero_electric());
        auto [b1, b0] = run(M_PI / 3 + 2 * M_PI, zero_electric());
        CHECK(recover_flux_mod(a1, a0, free_flags).value ==
              doctest::Approx(recover_flux_mod(b1, b0, free_flags).value).epsilon(1e-9));

        ElectricPotential E = gauss_electric(Vec3(0, 0, 3.0), 0.7, 0.3);
        auto [e1, e0] = run(M_PI / 3, E);
        SceneFlags el{false, true};
        FluxModResult r = recover_flux_mod(e1, e0, el);
        CHECK(r.modulus == doctest::Approx(M_PI));
        CHECK(r.value == doctest::Approx(M_PI / 3).epsilon(1e-5));
        CHECK(kind_of([&] { recover_flux_mod(e1, e0, el, FluxModulus::TwoPi); }) ==
              ErrorKind::ModeMismatch);
        CHECK(recover_flux_mod(a1, a0, free_flags, FluxModulus::Pi).modulus == doctest::Approx(M_PI));
    }

    TEST_CASE("long-range flux from line data")
    {
        SceneFlags free_flags{true, true};
        VectorPotential sr = make_vortex_potential(Vec3::Zero(), Vec3::UnitX(), 0.8, 0.5);
        MagneticField sr_field = make_vortex_field(Vec3::Zero(), Vec3::UnitX(), 0.8, 0.5);
        const Line probe{Vec3(0.2, 0.3, -0.1), Vec3(0.6, 0.0, 0.8)};
        {
            PhasePair p = hm_phase(sr, zero_electric(), LineQuery{probe, {}});
            PhiLOptions opt;
            opt.B = sr_field.eval;
            PhiLResult r = recover_Phi_L(p, SceneFlags{true, false}, opt);
            CHECK(std::abs(r.reduced) < 1e-6);
        }

        auto [T, g] = make_longrange_potential(pz(), 2.0);
        for (double a : {0.3, 1.1, -0.7}) {
            const Vec3 v(std::cos(a), 0.0, std::sin(a));
            const Line l{Vec3(0.1, -0.4, 0.2), v};
            PhasePair p = hm_phase(T, zero_electric(), LineQuery{l, {}});
            PhiLResult r = recover_Phi_L(p, free_flags);
            CHECK(std::abs(std::remainder(r.reduced - 2.0 * std::sin(a), 2 * M_PI)) < 1e-6);

            // tail plus a compact vortex, corrected by the known field
            PhasePair q = hm_phase(T + sr, zero_electric(), LineQuery{l, {}});
            PhiLOptions opt;
            opt.B = sr_field.eval;
            PhiLResult rq = recover_Phi_L(q, SceneFlags{true, false}, opt);
            CHECK(rq.raw == doctest::Approx(2.0 * std::sin(a)).epsilon(1e-6));
        }

        // a 2 pi tube flux is invisible
        Obstacle obs = unit_torus();
        const Vec3 v = Vec3(0.3, 0.0, 1.0).normalized();
        VectorPotential ab = make_ab_torus_potential(obs, 0, 2 * M_PI);
        for (const HomologyLabel& h : {HomologyLabel{0}, HomologyLabel{1}}) {
            const Line l = representative_lines(obs, h, v, 1, 9).front();
            PhiLResult base = recover_Phi_L(phase_on(T, zero_electric(), obs, l), free_flags);
            PhiLResult with = recover_Phi_L(phase_on(T + ab, zero_electric(), obs, l), free_flags);
            CHECK(std::abs(std::remainder(with.reduced - base.reduced, 2 * M_PI)) < 1e-6);
            CHECK(with.reduced == doctest::Approx(base.reduced).epsilon(1e-6));
        }

        PhasePair p = hm_phase(sr, zero_electric(), LineQuery{probe, {}});
        CHECK(recover_Phi_L(p, SceneFlags{false, true}).modulus == doctest::Approx(M_PI));
        CHECK(kind_of([&] { recover_Phi_L(p, SceneFlags{true, false}); }) == ErrorKind::InvalidArgument);
        PhiLOptions growing;
        growing.B = VecField([](const Vec3&) { return Vec3(-0.8, 0, 0.6); });
        growing.vperp = Vec3::UnitY();
        growing.max_doublings = 3;
        CHECK(kind_of([&] { recover_Phi_L(p, SceneFlags{true, false}, growing); }) ==
              ErrorKind::BCorrectionNonConvergent);
    }

    TEST_CASE("half disk flux")
    {
        VecField uniform = [](const Vec3&) { return Vec3(0, 0, 2.0); };
        CHECK(half_disk_flux(uniform, Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 1.5) ==
              doctest::Approx(2.0 * 0.5 * M_PI * 2.25).epsilon(1e-10));
        CHECK(half_disk_flux(uniform, Vec3::Zero(), Vec3::UnitY(), Vec3::UnitX(), 1.5) ==
              doctest::Approx(-2.0 * 0.5 * M_PI * 2.25).epsilon(1e-10));
    }

    TEST_CASE("sum of asymptotic coefficients")
    {
        VectorPotential sr = make_vortex_potential(Vec3::Zero(), Vec3::UnitY(), 0.8, 0.5);
        MagneticField srf = make_vortex_field(Vec3::Zero(), Vec3::UnitY(), 0.8, 0.5);
        AinfOptions with_b;
        with_b.B = srf.eval;
        Vec3 z = recover_Ainf_sum(scene_phase_source(sr, zero_electric()), Vec3(0.1, 0.2, 0), Vec3(1, 1, 1), with_b);
        CHECK(z.norm() < 1e-3);

        auto [T, g] = make_longrange_potential(pz(), 2.0);
        PhaseSource src = scene_phase_source(T, zero_electric());
        std::mt19937_64 rng(3);
        std::normal_distribution<double> nd;
        for (int k = 0; k < 4; ++k) {
            Vec3 v = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
            Vec3 got = recover_Ainf_sum(src, Vec3(0.2, -0.1, 0.3), v);
            Vec3 want = 2.0 * (Vec3::UnitZ() - v.z() * v);
            CHECK((got - want).norm() < 1e-3);
            Vec3 back = recover_Ainf_sum(src, Vec3(0.2, -0.1, 0.3), -v);
            CHECK((back - got).norm() < 1e-3);
        }
    }

    TEST_CASE("grid output")
    {
        ReconstructionGrid g;
        g.n = 2;
        g.half_width = 1.0;
        g.ncomp = 2;
        g.values = {1, 2, 3, 4, 5, 6, 7, 8};
        std::ostringstream os;
        write_grid_csv(os, g, {"bx"});
        CHECK(os.str() == "x,y,bx,c1\n-1,-1,1,2\n-1,1,3,4\n1,-1,5,6\n1,1,7,8\n");
        CHECK(relative_l2(g, 0, [](const Vec3& x) { return x.x() + x.y() > 1 ? 7.0 : 0.0; }) ==
              doctest::Approx(std::sqrt(35.0) / 7.0));
        ErrorSummary s;
        s.add("rel_l2", 0.25);
        s.add("n", 64);
        std::ostringstream es;
        write_error_summary(es, s);
        CHECK(es.str() == "rel_l2=0.25\nn=64\n");
        CHECK(kind_of([&] { write_grid_binary("/nonexistent/dir/x.bin", g); }) == ErrorKind::Io);
    }
}
