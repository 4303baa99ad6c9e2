#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kgscatter/geometry.hpp"
#include "kgscatter/hm_scattering.hpp"
#include "kgscatter/potentials.hpp"

namespace kgs {

// Phase data on demand: the scattering data for any admissible line.
using PhaseSource = std::function<PhasePair(const Line&)>;

PhaseSource scene_phase_source(const VectorPotential& A, const ElectricPotential& A0,
                               double tol = 1e-11);

// Transverse grid of phase pairs for a single direction, row-major nx * ny.
struct PhaseDataset {
    Vec3 nu = Vec3::UnitX();
    Vec3 b1 = Vec3::UnitY(), b2 = Vec3::UnitZ();
    int nx = 0, ny = 0;
    double h = 0.1;
    std::vector<PhasePair> phases;
};

struct DecoupledData {
    std::vector<double> int_A;
    std::vector<double> int_A0;
};

// Nearest-branch continuation from the seed point; the seed is taken to its principal value.
std::vector<double> unwrap_phases(const std::vector<double>& wrapped, int nx, int ny,
                                  int seed_index, double max_jump = 0.5 * kPi);
// Unwraps both components (seed: largest weight, or the center), then decouples.
PhaseDataset unwrap_dataset(const PhaseDataset& d, const std::vector<double>* weights = nullptr,
                            double max_jump = 0.5 * kPi);
// Requires continuous phases: adjacent jumps above max_jump raise UnwrapAmbiguity.
DecoupledData decouple(const PhaseDataset& d, double max_jump = 0.5 * kPi);

// ---------------------------------------------------------------------------
// Plane tomography.

struct PlaneFrame {
    Vec3 center = Vec3::Zero();
    Vec3 b1 = Vec3::UnitX(), b2 = Vec3::UnitY();  // normal = b1 x b2

    Vec3 normal() const { return b1.cross(b2); }
    Vec3 point(double a, double b) const { return center + a * b1 + b * b2; }
    // Line at angle phi (direction cos b1 + sin b2) and signed offset s along (-sin b1 + cos b2).
    Line line(double phi, double s) const;
};

struct SinogramSpec {
    int n_angles = 64;
    int n_offsets = 128;
    double half_width = 4.0;  // offsets span [-half_width, half_width]

    double ds() const { return 2.0 * half_width / (n_offsets - 1); }
    double offset(int j) const { return -half_width + j * ds(); }
    double angle(int k) const { return kPi * k / n_angles; }
};

struct Sinogram {
    PlaneFrame frame;
    SinogramSpec spec;
    std::vector<double> data;  // angle-major

    double at(int k, int j) const { return data[static_cast<std::size_t>(k) * spec.n_offsets + j]; }
};

using LineFunctional = std::function<double(const Line&)>;

// Checks the plane and every sampled line against the obstacle (PlaneBlocked).
void check_plane(const Obstacle* obs, const PlaneFrame& f, const SinogramSpec& spec);

Sinogram sample_sinogram(const LineFunctional& F, const PlaneFrame& f, const SinogramSpec& spec);

// Ram-Lak kernel with cutoff band_limit * Nyquist.
std::vector<double> ramp_filter(const Sinogram& s, double band_limit = 1.0);
// Backprojection of filtered data at in-plane coordinates (a, b).
std::vector<double> backproject(const Sinogram& s, const std::vector<double>& filtered,
                                const std::vector<std::pair<double, double>>& pts);
std::vector<double> backproject_serial(const Sinogram& s, const std::vector<double>& filtered,
                                       const std::vector<std::pair<double, double>>& pts);
std::vector<double> fbp(const Sinogram& s, const std::vector<std::pair<double, double>>& pts,
                        double band_limit = 1.0);

// Square tile of n x n samples on a plane, row-major in (b1 index, b2 index).
struct ReconstructionGrid {
    PlaneFrame frame;
    int n = 64;
    double half_width = 2.0;
    int ncomp = 1;
    std::vector<double> values;  // point-major, ncomp per point

    double coord(int i) const { return -half_width + 2.0 * half_width * i / (n - 1); }
    Vec3 point(int i, int j) const { return frame.point(coord(i), coord(j)); }
    std::vector<std::pair<double, double>> plane_points() const;
};

struct A0Options {
    SinogramSpec spec;
    int tile = 64;
    double tile_half_width = 2.0;
    double band_limit = 1.0;
    const Obstacle* obstacle = nullptr;
};

ReconstructionGrid reconstruct_A0(const PhaseSource& data, const PlaneFrame& plane,
                                  const A0Options& opt = {});
double reconstruct_A0_at(const PhaseSource& data, const Vec3& y, const Vec3& normal,
                         const A0Options& opt = {});

struct BOptions {
    SinogramSpec spec;
    int tile = 64;
    double tile_half_width = 2.0;
    double band_limit = 1.0;
    const Obstacle* obstacle = nullptr;
};

// Cartesian components (b1, b2, normal) of B on the tile, from offset derivatives of the
// magnetic line data on planes normal to each component.
ReconstructionGrid reconstruct_B(const PhaseSource& data, const PlaneFrame& plane,
                                 const BOptions& opt = {});
// Component of B along the plane normal over the given in-plane points.
std::vector<double> reconstruct_B_normal(const PhaseSource& data, const PlaneFrame& plane,
                                         const std::vector<std::pair<double, double>>& pts,
                                         const BOptions& opt);
// Interior divergence of the reconstructed field relative to its RMS magnitude.
double reconstructed_divergence_ratio(const PhaseSource& data, const PlaneFrame& plane,
                                      const ReconstructionGrid& B, const BOptions& opt = {});

// ---------------------------------------------------------------------------

struct SceneFlags {
    bool a0_zero = false;
    bool b_zero = false;
};

enum class FluxModulus { TwoPi, Pi, Auto };

struct FluxModResult {
    double value = 0.0;    // in [0, modulus)
    double modulus = kTwoPi;
};

// Phase difference between lines of two classes in the same direction.
FluxModResult recover_flux_mod(const PhasePair& class1, const PhasePair& class2,
                               const SceneFlags& flags, FluxModulus mode = FluxModulus::Auto);

struct PhiLOptions {
    std::optional<VecField> B;  // known or reconstructed field; empty means B = 0
    std::optional<Vec3> vperp;
    double tol = 1e-8;
    double s0 = 8.0;
    int max_doublings = 12;
    const Obstacle* obstacle = nullptr;
};

struct PhiLResult {
    double raw = 0.0;  // decoupled line integral minus the field correction
    double reduced = 0.0;
    double modulus = kTwoPi;
};

// Flux of B through the half disk {x + a v + b vp : a^2 + b^2 <= s^2, b >= 0}, oriented by v x vp.
double half_disk_flux(const VecField& B, const Vec3& x, const Vec3& v, const Vec3& vp, double s,
                      double tol = 1e-10);

PhiLResult recover_Phi_L(const PhasePair& data, const SceneFlags& flags,
                         const PhiLOptions& opt = {});

struct AinfOptions {
    double dtheta = 1e-3;
    std::optional<VecField> B;  // moment correction; empty means B = 0
    double length_scale = 1.0;
    const Obstacle* obstacle = nullptr;
};

Vec3 recover_Ainf_sum(const PhaseSource& data, const Vec3& x, const Vec3& v,
                      const AinfOptions& opt = {});

// ---------------------------------------------------------------------------

void write_grid_csv(std::ostream& os, const ReconstructionGrid& g,
                    const std::vector<std::string>& names);
void write_grid_binary(const std::string& path, const ReconstructionGrid& g);

struct ErrorSummary {
    std::vector<std::pair<std::string, double>> entries;
    void add(const std::string& k, double v) { entries.emplace_back(k, v); }
};
void write_error_summary(std::ostream& os, const ErrorSummary& s);

// Relative L2 error of component c against a reference field on the grid.
double relative_l2(const ReconstructionGrid& g, int c, const std::function<double(const Vec3&)>& ref);

}  // namespace kgs
