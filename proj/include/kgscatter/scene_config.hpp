#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgscatter/geometry.hpp"
#include "kgscatter/inversion.hpp"
#include "kgscatter/kg_solver.hpp"
#include "kgscatter/potentials.hpp"

namespace kgs {

struct SolverBlock {
    int grid = 512;
    double extent = 32.0;
    double T = 20.0;
    double dt = 0.02;
    std::vector<double> v_over_m = {4, 8, 16, 32};
    double sigma = 1.0;
    double offset = 0.3;  // transverse offset of the packet line
    double escape_tol = 1e-3;
    double p3 = 0.0;
    std::string barrier = "smooth";
    double slope_lo = -1.3, slope_hi = -0.7;
    bool check_resolution = false;
    bool measure_minus = false;
};

struct DatasetBlock {
    Vec3 nu = Vec3::UnitZ();
    int offsets = 11;      // transverse lines per axis for forward tables
    double spacing = 0.5;  // transverse line spacing
    Vec3 plane_center = Vec3::Zero();
    Vec3 plane_b1 = Vec3::UnitX(), plane_b2 = Vec3::UnitY();
    int angles = 64;
    int sino_offsets = 128;
    double sino_half_width = 4.0;
    int tile = 64;
    double tile_half_width = 2.0;
    double dtheta = 1e-3;
    std::vector<std::string> products = {"flux", "Phi_L"};
};

struct SceneConfig {
    std::vector<Ball> balls;
    std::vector<Torus> tori;
    double collar = -1.0;
    std::vector<nlohmann::json> potentials;  // each with a "type" key
    double mass = 0.5;
    std::optional<bool> a0_zero, b_zero;
    std::optional<SolverBlock> solver;
    DatasetBlock dataset;
    std::string output = "out";
    std::uint64_t seed = 7;
};

SceneConfig parse_config(const nlohmann::json& j);
SceneConfig load_config(const std::string& path);
nlohmann::json to_json(const SceneConfig& c);

// Scene assembled from a config: obstacle and the summed potentials.
struct Scene {
    Obstacle obstacle;
    VectorPotential A;
    ElectricPotential A0;
    MagneticField B;  // known field of the field-carrying constructors
    SceneFlags flags;
    std::vector<double> handle_flux;  // constructed flux per torus
    std::vector<std::pair<std::string, VectorPotential>> magnetic_parts;
    std::vector<std::pair<std::string, ElectricPotential>> electric_parts;
    std::vector<std::pair<std::string, MagneticField>> fields;
    double mass = 0.5;
};

Scene build_scene(const SceneConfig& c);

}  // namespace kgs
