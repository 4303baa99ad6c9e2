#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "kgscatter/scene_config.hpp"

namespace kgs {

struct CommandOptions {
    std::string out;                    // empty: the config's output directory
    std::optional<std::uint64_t> seed;  // overrides the config seed
    double tol = 1e-10;                 // line quadrature tolerance
    std::ostream* log = nullptr;        // progress and reports; null means std::cout
};

// Exit codes: 0 pass, 1 a check failed. Errors are thrown as kgs::Error.
int cmd_validate(const SceneConfig& cfg, const CommandOptions& opt);
int cmd_forward(const SceneConfig& cfg, const CommandOptions& opt);
int cmd_verify(const SceneConfig& cfg, const CommandOptions& opt);
int cmd_invert(const SceneConfig& cfg, const CommandOptions& opt);
int cmd_export_plots(const std::string& out_dir, const CommandOptions& opt);

// Line phases of the transverse dataset grid, one row per admissible line.
struct PhaseRow {
    int i = 0, j = 0;
    double s1 = 0.0, s2 = 0.0;
    Vec3 base = Vec3::Zero();
    HomologyLabel label;
    double theta_plus = 0.0, theta_minus = 0.0;
};
std::vector<PhaseRow> read_phase_table(const std::string& path);
std::string label_string(const HomologyLabel& h);

}  // namespace kgs
