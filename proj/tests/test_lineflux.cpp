#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "kgscatter/lineflux.hpp"
#include "kgscatter/quadrature.hpp"
#include "test_util.hpp"

using namespace kgs;
using namespace kgs::testing;

namespace {

LineQuery query(const Vec3& base, const Vec3& dir, HomologyLabel h = {})
{
    return LineQuery{Line{base, dir.normalized()}, std::move(h)};
}

// Analytic A_inf(v) + A_inf(-v) for the gradient tail with lambda_inf = v_z.
Vec3 tail_ainf_sum(const Vec3& v)
{
    const Vec3 w = v.normalized();
    return 2.0 * (Vec3::UnitZ() - w.z() * w);
}

}  // namespace

TEST_SUITE("lineflux")
{
    TEST_CASE("zero potentials give zero line data")
    {
        XRaySample s = xray(zero_potential(), zero_electric(), query(Vec3(0.3, 1, 2), Vec3(1, 2, 3)));
        CHECK(s.int_A == 0.0);
        CHECK(s.int_A0 == 0.0);
    }

    TEST_CASE("Gaussian electric potential integrates to sqrt(pi)")
    {
        ElectricPotential e = make_gaussian_electric(Vec3::Zero(), 1.0, 1.0);
        XRaySample s = xray(zero_potential(), e, query(Vec3::Zero(), Vec3(0.2, -1, 0.5)), 1e-12);
        CHECK(s.int_A0 == doctest::Approx(std::sqrt(kPi)).epsilon(1e-10));
        CHECK(s.error < 1e-10);
        // Offset by d: sqrt(pi) exp(-d^2).
        const double d = 0.7;
        CHECK(xray_A0(e, Line{Vec3(0, d, 0), Vec3::UnitX()}, 1e-12) ==
              doctest::Approx(std::sqrt(kPi) * std::exp(-d * d)).epsilon(1e-10));
    }

    TEST_CASE("Aharonov-Bohm lines: the class (1) line carries the flux")
    {
        const Obstacle obs = unit_torus();
        const double phi = 1.3;
        VectorPotential A = make_ab_torus_potential(obs, 0, phi);
        const Line through{Vec3(0.1, 0, 0), Vec3::UnitZ()};
        const Line outside{Vec3(5, 0, 0), Vec3::UnitZ()};
        REQUIRE(classify_line(obs, through) == HomologyLabel{1});
        REQUIRE(classify_line(obs, outside) == HomologyLabel{0});
        const double a1 = xray_A(A, through, 1e-11), a0 = xray_A(A, outside, 1e-11);
        CHECK(a1 - a0 == doctest::Approx(phi).epsilon(1e-7));
        // Stokes: the same number from the closed curve through the line.
        ClosedCurve c = closure_curve(obs, through, 40.0, ArcChoice::Short);
        CHECK(curve_integral(A.eval, c, 1e-11) == doctest::Approx(phi).epsilon(1e-7));
        CHECK(xray_A(A, Line{Vec3(0.1, 0, 0), -Vec3::UnitZ()}, 1e-11) == doctest::Approx(-phi).epsilon(1e-7));
    }

    TEST_CASE("batch sampling: parallel equals serial, CSV layout")
    {
        const Obstacle obs = unit_torus();
        VectorPotential A = make_ab_torus_potential(obs, 0, 0.9);
        ElectricPotential e = make_gaussian_electric(Vec3(0, 0, 1), 0.8, 0.4);
        std::vector<LineQuery> qs;
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> ud(-0.8, 0.8);
        for (int k = 0; k < 12; ++k) {
            Line l{Vec3(ud(rng), ud(rng), 0), Vec3(0.1 * ud(rng), 0.1 * ud(rng), 1).normalized()};
            qs.push_back(LineQuery{l, classify_line(obs, l)});
        }
        auto par = xray_batch(A, e, qs);
        auto ser = xray_batch_serial(A, e, qs);
        REQUIRE(par.size() == ser.size());
        for (std::size_t i = 0; i < par.size(); ++i) {
            CHECK(par[i].int_A == ser[i].int_A);
            CHECK(par[i].int_A0 == ser[i].int_A0);
            CHECK(par[i].int_A == doctest::Approx(0.9).epsilon(1e-7));
        }
        std::ostringstream os;
        write_xray_csv(os, par);
        std::istringstream is(os.str());
        std::string header, row;
        std::getline(is, header);
        std::getline(is, row);
        CHECK(header == "x1,x2,x3,v1,v2,v3,h1,int_A,int_A0,err");
        CHECK(std::count(row.begin(), row.end(), ',') == 9);
        std::ostringstream again;
        write_xray_csv(again, xray_batch(A, e, qs));
        CHECK(again.str() == os.str());
    }

    TEST_CASE("long-range flux of a short-range potential vanishes")
    {
        VectorPotential A = make_ab_torus_potential(unit_torus(), 0, 1.1);
        CHECK(std::abs(long_range_flux(A, Vec3(0.3, 0.4, 1))) < 1e-6);
        auto [G, g] = make_gaussian_gauge(Vec3(0.2, 0, 0), 1.0, 0.5);
        CHECK(std::abs(long_range_flux(G, Vec3::UnitX())) < 1e-6);
    }

    TEST_CASE("long-range flux of the gradient tail is the jump of lambda_inf")
    {
        auto [A, g] = make_longrange_potential(pz(), 2.0);
        CHECK(long_range_flux(A, Vec3::UnitZ()) == doctest::Approx(2.0).epsilon(1e-7));
        const Vec3 v = Vec3(0.3, -0.5, 0.6).normalized();
        const double f = long_range_flux(A, v), fm = long_range_flux(A, -v);
        CHECK(f == doctest::Approx(2.0 * v.z()).epsilon(1e-7));
        CHECK(std::abs(f + fm) < 1e-7);
        // Independent of the base point and of the half-plane.
        std::mt19937_64 rng(8);
        std::normal_distribution<double> nd;
        double lo = 1e9, hi = -1e9;
        for (int k = 0; k < 5; ++k) {
            LongRangeOptions opt;
            opt.x = 2.0 * Vec3(nd(rng), nd(rng), nd(rng));
            Vec3 p(nd(rng), nd(rng), nd(rng));
            opt.vperp = (p - p.dot(v) * v).normalized();
            const double val = long_range_flux(A, v, opt);
            lo = std::min(lo, val);
            hi = std::max(hi, val);
        }
        CHECK(hi - lo < 1e-5);
        CHECK(long_range_flux_from_ainf(*A.a_inf, v, any_perpendicular(v)) == doctest::Approx(f).epsilon(1e-7));
    }

    TEST_CASE("gauge covariance of line data")
    {
        const Obstacle obs = unit_torus();
        VectorPotential A1 = make_ab_torus_potential(obs, 0, 0.8);
        auto [T, g] = make_longrange_potential(pz(), 3.0);
        VectorPotential A2 = A1 + T;
        std::mt19937_64 rng(3);
        std::normal_distribution<double> nd;
        for (int k = 0; k < 6; ++k) {
            const Vec3 v = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
            Line l{Vec3(6 + nd(rng), nd(rng), nd(rng)), v};
            if (obs.line_distance(l) < 0.05) continue;
            const double d = xray_A(A2, l, 1e-11) - xray_A(A1, l, 1e-11);
            CHECK(d == doctest::Approx(g.lambda_inf(v) - g.lambda_inf(-v)).epsilon(1e-6));
        }
    }

    TEST_CASE("hole flux: Aharonov-Bohm values and the line relation")
    {
        const Obstacle obs = unit_torus();
        const double phi = 0.7;
        VectorPotential ab = make_ab_torus_potential(obs, 0, phi);
        CHECK(hole_flux(ab, obs, {1}, Vec3::UnitZ()) == doctest::Approx(phi).epsilon(1e-8));
        CHECK(std::abs(hole_flux(ab, obs, {0}, Vec3::UnitZ())) < 1e-8);
        CHECK(hole_flux(ab, obs, {-1}, -Vec3::UnitZ()) == doctest::Approx(-phi).epsilon(1e-8));
        CHECK(kind_of([&] { hole_flux(ab, obs, {-1}, Vec3::UnitZ()); }) == ErrorKind::NoRepresentative);

        // With a long-range tail the line integral splits into hole flux and Phi_L.
        auto [T, g] = make_longrange_potential(pz(), 3.0);
        VectorPotential A = ab + T;
        const Vec3 v = Vec3(0.2, 0.1, 1).normalized();
        FluxRecord rec = flux_record(A, obs, {1}, v);
        CHECK(rec.F_h == doctest::Approx(phi).epsilon(1e-7));
        CHECK(rec.Phi_L == doctest::Approx(2.0 * v.z()).epsilon(1e-7));
        for (const Line& l : representative_lines(obs, {1}, v, 3, 21)) {
            const double lhs = xray_A(A, l, 1e-11);
            CHECK(lhs == doctest::Approx(rec.F_h + rec.Phi_L).epsilon(1e-5));
        }
    }

    TEST_CASE("hole flux shifts by 2 pi times the linking when the flux does")
    {
        const Obstacle obs({}, {Torus{Vec3::Zero(), Vec3::UnitZ(), 2.0, 0.5},
                                Torus{Vec3(9, 0, 0), Vec3::UnitX(), 2.0, 0.5}});
        const double p0 = 0.4, p1 = -1.1;
        VectorPotential A = make_ab_torus_potential(obs, 0, p0) + make_ab_torus_potential(obs, 1, p1);
        VectorPotential B = make_ab_torus_potential(obs, 0, p0 + kTwoPi) + make_ab_torus_potential(obs, 1, p1);
        const Vec3 v = Vec3(0.05, 0.02, 1).normalized();
        const double fa = hole_flux(A, obs, {1, 0}, v), fb = hole_flux(B, obs, {1, 0}, v);
        CHECK(fb - fa == doctest::Approx(kTwoPi).epsilon(1e-8));
        CHECK(fa == doctest::Approx(p0).epsilon(1e-7));
    }

    TEST_CASE("unreachable classes have no representative")
    {
        const Obstacle obs = unit_torus();
        VectorPotential A = make_ab_torus_potential(obs, 0, 1.0);
        CHECK(kind_of([&] { hole_flux(A, obs, {2}, Vec3::UnitZ()); }) == ErrorKind::NoRepresentative);
        // Lines in the plane of the torus cannot thread it.
        HoleFluxOptions opt;
        opt.max_tries = 500;
        CHECK(kind_of([&] { hole_flux(A, obs, {1}, Vec3::UnitX(), opt); }) == ErrorKind::NoRepresentative);
    }

    TEST_CASE("angular derivative of a pure gauge without long-range part vanishes")
    {
        auto [G, g] = make_gaussian_gauge(Vec3(0.1, 0.2, 0), 0.9, 1.3);
        AngularDerivative d = angular_derivative_xray(G, Vec3(0.4, -0.2, 0.3), Vec3::UnitX(), Vec3::UnitY());
        CHECK(std::abs(d.central) < 1e-6);
        CHECK(std::abs(d.richardson) < 1e-6);
    }

    TEST_CASE("angular derivative of the tail is the A_inf sum")
    {
        auto [A, g] = make_longrange_potential(pz(), 2.0);
        for (const auto& [v, vp] : {std::pair{Vec3(Vec3::UnitX()), Vec3(Vec3::UnitZ())},
                                    std::pair{Vec3(Vec3(1, 1, 1).normalized()), Vec3(Vec3(1, -1, 0).normalized())},
                                    std::pair{Vec3(Vec3(0, 0.6, 0.8)), Vec3(Vec3(0, -0.8, 0.6))}}) {
            AngularDerivative d = angular_derivative_xray(A, Vec3(0.5, 0.1, -0.3), v, vp);
            CHECK(d.richardson == doctest::Approx(tail_ainf_sum(v).dot(vp)).epsilon(1e-3).scale(1.0));
        }
    }

    TEST_CASE("angular derivative of a Coulomb potential is the field moment")
    {
        MagneticField B = make_vortex_field(Vec3(0.1, 0, 0), Vec3(1, 0.5, 2), 0.5, 1.0);
        VectorPotential A = make_coulomb_potential(B);
        const Vec3 x(0.2, 0.3, -0.1), v = Vec3(1, 0.2, 0).normalized(), vp = Vec3(0, 0, 1);
        AngularDerivative d = angular_derivative_xray(A, x, v, vp, 1e-3, nullptr, 1e-9);
        // Moment integral by a plain adaptive rule over a finite window.
        const Vec3 n = vp.cross(v);
        const double m = integrate([&](double t) { return t * B(x + t * v).dot(n); }, -8.0, 8.0, 1e-12).value;
        CHECK(std::abs(m) > 0.05);
        CHECK(d.richardson == doctest::Approx(m).epsilon(1e-4));
        CHECK(moment_integral(B.eval, x, v, vp, 0.5) == doctest::Approx(m).epsilon(1e-9));
    }

    TEST_CASE("the angular-derivative identity: moment plus A_inf sum")
    {
        const Vec3 c(0.1, -0.2, 0.2), axis = Vec3(0.3, 1, 0.4).normalized();
        VectorPotential vortex = make_vortex_potential(c, axis, 0.6, 0.9);
        auto [T, g] = make_longrange_potential(pz(), 2.5);
        VectorPotential A = vortex + T;
        std::mt19937_64 rng(12);
        std::normal_distribution<double> nd;
        for (int k = 0; k < 4; ++k) {
            const Vec3 x = 0.4 * Vec3(nd(rng), nd(rng), nd(rng));
            const Vec3 v = Vec3(nd(rng), nd(rng), nd(rng)).normalized();
            Vec3 p(nd(rng), nd(rng), nd(rng));
            const Vec3 vp = (p - p.dot(v) * v).normalized();
            const double lhs = angular_derivative_xray(A, x, v, vp).richardson;
            const double moment = moment_integral(A.field, x, v, vp, 0.6);
            const double rhs = moment + tail_ainf_sum(v).dot(vp);
            CHECK(std::abs(lhs - rhs) < 1e-3);
        }
    }

    TEST_CASE("rotating across the obstacle is reported")
    {
        const Obstacle obs = unit_torus();
        VectorPotential A = make_ab_torus_potential(obs, 0, 1.0);
        CHECK(kind_of([&] {
                  angular_derivative_xray(A, Vec3(1.49, 0, 5), -Vec3::UnitZ(), Vec3::UnitX(), 1e-2, &obs);
              }) == ErrorKind::ClassCrossing);
        // A comfortable line is fine and gives zero (no field, no tail).
        AngularDerivative d = angular_derivative_xray(A, Vec3(0.2, 0, 5), -Vec3::UnitZ(), Vec3::UnitX(), 1e-3, &obs);
        CHECK(std::abs(d.richardson) < 1e-6);
    }
}
