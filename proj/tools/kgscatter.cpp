#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kgscatter/commands.hpp"
#include "kgscatter/errors.hpp"
#include "kgscatter/parallel.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Klein-Gordon scattering phases: forward tables, solver checks, reconstructions"};
    app.require_subcommand(1);

    std::string config, out;
    int threads = 0;
    std::uint64_t seed = 0;
    double tol = 1e-10;

    auto common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", config, "scene config (JSON)");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory (default: the config's output)");
        sub->add_option("--threads", threads, "worker threads (default: KGSCATTER_THREADS or all)")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--seed", seed, "RNG seed (default: the config's seed)");
        sub->add_option("--tol", tol, "line quadrature tolerance")->check(CLI::PositiveNumber);
    };
    auto* validate = app.add_subcommand("validate", "check geometry and potential classes");
    auto* forward = app.add_subcommand("forward", "phase tables and hole fluxes");
    auto* verify = app.add_subcommand("verify", "solver convergence study");
    auto* invert = app.add_subcommand("invert", "reconstructions and flux report");
    auto* exportp = app.add_subcommand("export-plots", "long-format plot tables from an output directory");
    for (auto* s : {validate, forward, verify, invert}) common(s, true);
    common(exportp, false);

    CLI11_PARSE(app, argc, argv);

    if (threads == 0)
        if (const char* env = std::getenv("KGSCATTER_THREADS")) threads = std::atoi(env);
    if (threads > 0) kgs::set_threads(threads);

    try {
        kgs::CommandOptions opt;
        opt.out = out;
        opt.tol = tol;
        for (auto* s : {validate, forward, verify, invert, exportp})
            if (s->count("--seed") && *s) opt.seed = seed;

        if (*exportp) {
            std::string dir = out;
            if (dir.empty() && !config.empty()) dir = kgs::load_config(config).output;
            if (dir.empty()) throw kgs::Error(kgs::ErrorKind::Config, "export-plots needs --out or --config");
            return kgs::cmd_export_plots(dir, opt);
        }
        const kgs::SceneConfig cfg = kgs::load_config(config);
        if (*validate) return kgs::cmd_validate(cfg, opt);
        if (*forward) return kgs::cmd_forward(cfg, opt);
        if (*verify) return kgs::cmd_verify(cfg, opt);
        return kgs::cmd_invert(cfg, opt);
    } catch (const kgs::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
