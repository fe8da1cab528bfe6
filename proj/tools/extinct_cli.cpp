#include "extinct/cli_io.hpp"
#include "extinct/homog.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <iostream>

namespace {

using namespace extinct;
using nlohmann::json;

enum Exit { kOk = 0, kVerificationFailed = 1, kConfigError = 2, kRuntimeError = 3 };

json num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

int report_error(const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
        case ErrorKind::ConfigInvalid:
        case ErrorKind::ParseError:
            return kConfigError;
        default:
            return kRuntimeError;
    }
}

io::ExperimentConfig load(const std::string& path) {
    try {
        return io::load_config(path);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::IoError) throw Error(ErrorKind::ConfigInvalid, e.what());
        throw;
    }
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& out) {
    const auto config = load(config_path);
    const auto result = io::run_experiment(config, out ? std::optional<std::filesystem::path>(*out) : std::nullopt);
    std::cout << io::summary_to_json(result.summary);
    return result.summary.status.state == io::RunStatus::State::verified ? kOk : kVerificationFailed;
}

int cmd_sweep(const std::string& pattern, int parallel, const std::string& out) {
    const auto paths = io::expand_glob(pattern);
    const auto entries = io::sweep(paths, parallel, out);
    int code = kOk;
    for (const auto& e : entries) {
        const auto state = e.summary.status.state;
        std::cout << e.name << ": "
                  << (state == io::RunStatus::State::verified ? "verified"
                      : state == io::RunStatus::State::failed ? "failed"
                                                              : "error (" + e.summary.status.error_kind + ")")
                  << "\n";
        if (state != io::RunStatus::State::verified) code = kVerificationFailed;
    }
    std::cout << entries.size() << " run(s); table written to " << (std::filesystem::path(out) / "sweep.csv").string()
              << "\n";
    return code;
}

int cmd_degree(const std::string& config_path) {
    const auto config = load(config_path);
    const auto built = io::build_system(config);
    const HomogeneousFn& H = built.H;
    const int n = H.dimension();
    json j;
    j["declared_degree"] = -config.alpha;
    const auto d = estimate_degree(H, 64, 1e-3, 1e3, config.seed);
    j["estimated_degree"] = num(d.degree);
    j["max_deviation"] = num(d.max_deviation);
    const auto st = *built.sys.H.sphere_stats();
    j["sphere_min"] = num(st.c1);
    j["sphere_max"] = num(st.c2);
    json probes = json::array();
    std::vector<Vector> points;
    for (int i = 0; i < n; ++i) points.push_back(Vector::Unit(n, i));
    for (const auto& v : random_unit_vectors(n, 4, config.seed)) points.push_back(v);
    for (const auto& x0 : points) {
        const auto p = probe_holder(H, x0, default_probe_radii(), 32, config.seed);
        json pj;
        pj["x0"] = std::vector<double>(x0.data(), x0.data() + x0.size());
        pj["gamma"] = num(p.gamma_est);
        pj["C"] = num(p.C_est);
        pj["degenerate"] = p.degenerate;
        probes.push_back(pj);
    }
    j["holder_probes"] = probes;
    std::cout << j.dump(2) << "\n";
    return kOk;
}

int cmd_radius(const std::string& config_path) {
    const auto config = load(config_path);
    const auto built = io::build_system(config);
    const auto r = extinction_radius(built.sys);
    const double y0_norm = config.y0.stableNorm();
    json j;
    j["r0"] = num(r.r0);
    j["a0"] = num(r.a0);
    j["symmetric"] = r.symmetric;
    j["y0_norm"] = y0_norm;
    j["y0_within_r0"] = y0_norm <= r.r0;
    if (!r.symmetric) {
        j["r0_z"] = num(r.r0_z);
        j["a0_z"] = num(r.a0_z);
    }
    std::cout << j.dump(2) << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-time extinction experiments for y' = -H(y)Ay + f(t,y)"};
    app.require_subcommand(1);
    app.set_version_flag("--version", io::kToolVersion);

    std::string config;
    std::optional<std::string> out;
    auto* run = app.add_subcommand("run", "Integrate, analyze and verify one configuration");
    run->add_option("--config", config, "Config file")->required();
    run->add_option("--out", out, "Output directory");

    auto* verify = app.add_subcommand("verify", "Run one configuration and report verification only");
    verify->add_option("--config", config, "Config file")->required();

    std::string pattern;
    std::string sweep_out;
    int parallel = 1;
    auto* sweep = app.add_subcommand("sweep", "Run every configuration matching a glob");
    sweep->add_option("--configs", pattern, "Glob of config files")->required();
    sweep->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
    sweep->add_option("--out", sweep_out, "Output directory")->required();

    auto* degree = app.add_subcommand("degree", "Homogeneity degree, sphere extrema and Hoelder probes of H");
    degree->add_option("--config", config, "Config file")->required();

    auto* radius = app.add_subcommand("radius", "Small-data extinction radius");
    radius->add_option("--config", config, "Config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) return cmd_run(config, out);
        if (*verify) return cmd_run(config, std::nullopt);
        if (*sweep) return cmd_sweep(pattern, parallel, sweep_out);
        if (*degree) return cmd_degree(config);
        if (*radius) return cmd_radius(config);
    } catch (const Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kRuntimeError;
}
