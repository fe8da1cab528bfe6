#include "extinct/cli_io.hpp"

#include "extinct/homog.hpp"
#include "extinct/oracle.hpp"

#include "json.hpp"

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace extinct::io {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& message) {
    throw Error(ErrorKind::ConfigInvalid, path + ": " + message);
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

/// Field access on one JSON object that remembers which keys were consumed.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) invalid(path_.empty() ? "<root>" : path_, "expected an object");
    }

    [[nodiscard]] bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& at(const std::string& key) {
        if (!has(key)) invalid(join(path_, key), "required field is missing");
        return j_.at(key);
    }

    [[nodiscard]] std::string path(const std::string& key) const { return join(path_, key); }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        if (!has(key)) {
            if (fallback) return *fallback;
            invalid(path(key), "required field is missing");
        }
        return to_number(j_.at(key), path(key));
    }

    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        if (!has(key)) {
            if (fallback) return *fallback;
            invalid(path(key), "required field is missing");
        }
        const json& v = j_.at(key);
        if (!v.is_string()) invalid(path(key), "expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = at(key);
        if (!v.is_array()) invalid(path(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(to_number(v[i], path(key) + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    /// Rejects every key that was never asked for.
    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) invalid(join(path_, item.key()), "unknown field");
        }
    }

    static double to_number(const json& v, const std::string& path) {
        if (v.is_string()) {
            const auto s = v.get<std::string>();
            if (s == "inf") return kInfinity;
            invalid(path, "expected a number");
        }
        if (!v.is_number()) invalid(path, "expected a number");
        const double x = v.get<double>();
        if (std::isnan(x)) invalid(path, "expected a number");
        return x;
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require_positive(double x, const std::string& path) {
    if (!(x > 0.0) || !std::isfinite(x)) invalid(path, "must be positive and finite");
}

json number_json(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

json vector_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_json(v(i)));
    return a;
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <class F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e);
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

std::string state_name(RunStatus::State s) {
    switch (s) {
        case RunStatus::State::verified: return "verified";
        case RunStatus::State::failed: return "failed";
        case RunStatus::State::error: return "error";
    }
    return "error";
}

double log_or_neg_inf(double x) { return x > 0.0 ? std::log(x) : -kInfinity; }

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
    ExperimentConfig cfg;
    cfg.hash = hex64(fnv1a(root.dump()));
    ObjectReader r(root, "");

    const json& m = r.at("matrix");
    if (!m.is_array() || m.empty()) invalid("matrix", "expected a nonempty array of rows");
    const auto n = static_cast<Eigen::Index>(m.size());
    cfg.matrix.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::string row_path = "matrix[" + std::to_string(i) + "]";
        const json& row = m[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
            invalid(row_path, "expected " + std::to_string(n) + " entries");
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            const double x = ObjectReader::to_number(row[static_cast<std::size_t>(j)],
                                                     row_path + "[" + std::to_string(j) + "]");
            if (!std::isfinite(x)) invalid(row_path + "[" + std::to_string(j) + "]", "must be finite");
            cfg.matrix(i, j) = x;
        }
    }

    cfg.alpha = r.number("alpha");
    require_positive(cfg.alpha, "alpha");

    {
        ObjectReader h(r.at("h_spec"), "h_spec");
        const bool by_catalog = h.has("catalog");
        const bool by_expression = h.has("expression");
        if (by_catalog == by_expression) invalid("h_spec", "exactly one of catalog or expression is required");
        if (by_catalog) {
            cfg.h_spec.catalog = h.string("catalog");
            cfg.h_spec.a = h.number("a", 1.0);
            require_positive(cfg.h_spec.a, "h_spec.a");
            cfg.h_spec.p = h.number("p", 2.0);
            require_positive(cfg.h_spec.p, "h_spec.p");
            if (h.has("weights")) {
                cfg.h_spec.weights = h.numbers("weights");
                for (std::size_t i = 0; i < cfg.h_spec.weights.size(); ++i) {
                    require_positive(cfg.h_spec.weights[i], "h_spec.weights[" + std::to_string(i) + "]");
                }
            }
        } else {
            cfg.h_spec.expression = h.string("expression");
        }
        h.finish();
    }

    {
        const auto y0 = r.numbers("y0");
        if (static_cast<Eigen::Index>(y0.size()) != n) {
            invalid("y0", "expected " + std::to_string(n) + " entries to match the matrix");
        }
        cfg.y0 = Eigen::Map<const Vector>(y0.data(), n);
        if (!cfg.y0.allFinite()) invalid("y0", "entries must be finite");
        if (cfg.y0.squaredNorm() == 0.0) invalid("y0", "must be nonzero");
    }

    cfg.t0 = r.number("t0", 0.0);
    if (!std::isfinite(cfg.t0)) invalid("t0", "must be finite");

    if (r.has("perturbation")) {
        ObjectReader p(r.at("perturbation"), "perturbation");
        auto& pc = cfg.perturbation;
        pc.kind = p.string("kind");
        static const std::set<std::string> kinds{"none", "fixed_direction", "rotational", "oscillating", "custom"};
        if (!kinds.count(pc.kind)) invalid("perturbation.kind", "unknown kind '" + pc.kind + "'");
        if (pc.kind != "none") {
            pc.M = p.number("M");
            if (!(pc.M >= 0.0) || !std::isfinite(pc.M)) invalid("perturbation.M", "must be nonnegative and finite");
            pc.delta = p.number("delta");
            require_positive(pc.delta, "perturbation.delta");
            pc.c_star = p.number("c_star", 0.0);
            if (!(pc.c_star >= 0.0)) invalid("perturbation.c_star", "must be nonnegative");
            pc.r_star = p.number("r_star", kInfinity);
            require_positive(std::isinf(pc.r_star) ? 1.0 : pc.r_star, "perturbation.r_star");
        }
        if (pc.kind == "fixed_direction" || pc.kind == "oscillating") {
            pc.direction = p.numbers("direction");
            if (static_cast<Eigen::Index>(pc.direction.size()) != n) {
                invalid("perturbation.direction", "expected " + std::to_string(n) + " entries");
            }
        }
        if (pc.kind == "oscillating") {
            pc.omega = p.number("omega");
            if (!std::isfinite(pc.omega)) invalid("perturbation.omega", "must be finite");
        }
        if (pc.kind == "rotational" && n % 2 != 0) {
            invalid("perturbation.kind", "rotational forcing needs an even dimension");
        }
        if (pc.kind == "custom") {
            const json& e = p.at("expression");
            if (!e.is_array() || static_cast<Eigen::Index>(e.size()) != n) {
                invalid("perturbation.expression", "expected " + std::to_string(n) + " component strings");
            }
            for (std::size_t i = 0; i < e.size(); ++i) {
                if (!e[i].is_string()) {
                    invalid("perturbation.expression[" + std::to_string(i) + "]", "expected a string");
                }
                pc.expression.push_back(e[i].get<std::string>());
            }
        }
        p.finish();
    }

    if (r.has("integrator")) {
        ObjectReader g(r.at("integrator"), "integrator");
        auto& ic = cfg.integrator;
        const std::string scheme = g.string("scheme", "desingularized");
        if (scheme == "direct") {
            ic.scheme = Scheme::direct;
        } else if (scheme == "desingularized") {
            ic.scheme = Scheme::desingularized;
        } else if (scheme == "reference") {
            ic.scheme = Scheme::reference;
        } else {
            invalid("integrator.scheme", "unknown scheme '" + scheme + "'");
        }
        ic.rel_tol = g.number("rel_tol", ic.rel_tol);
        require_positive(ic.rel_tol, "integrator.rel_tol");
        ic.abs_tol = g.number("abs_tol", ic.abs_tol);
        require_positive(ic.abs_tol, "integrator.abs_tol");
        ic.rho_floor = g.number("rho_floor", ic.rho_floor);
        require_positive(ic.rho_floor, "integrator.rho_floor");
        if (ic.rho_floor >= 1.0) invalid("integrator.rho_floor", "must be below 1 (it is relative to |y0|^alpha)");
        const double steps = g.number("max_steps", static_cast<double>(ic.max_steps));
        if (!(steps >= 1.0) || steps != std::floor(steps) || steps > 1e12) {
            invalid("integrator.max_steps", "must be a positive integer");
        }
        ic.max_steps = static_cast<std::size_t>(steps);
        g.finish();
    }

    if (r.has("analysis")) {
        ObjectReader a(r.at("analysis"), "analysis");
        cfg.analysis.tail_fraction = a.number("tail_fraction", cfg.analysis.tail_fraction);
        if (!(cfg.analysis.tail_fraction > 0.0 && cfg.analysis.tail_fraction <= 0.5)) {
            invalid("analysis.tail_fraction", "must lie in (0, 1/2]");
        }
        cfg.analysis.fit_decades = a.number("fit_decades", cfg.analysis.fit_decades);
        require_positive(cfg.analysis.fit_decades, "analysis.fit_decades");
        a.finish();
    }

    if (r.has("seed")) {
        const json& s = r.at("seed");
        if (!s.is_number_integer() || s.get<long long>() < 0) invalid("seed", "expected a nonnegative integer");
        cfg.seed = s.get<std::uint64_t>();
    }

    r.finish();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

BuiltSystem build_system(const ExperimentConfig& config) {
    const int n = static_cast<int>(config.matrix.rows());
    SpectralData sd = staged("spectral", [&] { return validate_and_decompose(config.matrix); });

    HomogeneousFn H = staged("homog", [&] {
        const auto& hs = config.h_spec;
        if (!hs.catalog.empty()) {
            HomogeneousFn h = [&] {
                try {
                    return catalog::by_name(hs.catalog, n, config.alpha, hs.a, hs.weights, hs.p);
                } catch (const Error& e) {
                    if (e.kind() == ErrorKind::ConfigInvalid) invalid("h_spec.catalog", e.what());
                    throw;
                }
            }();
            if (std::abs(h.alpha() - config.alpha) > 1e-12 * std::max(1.0, config.alpha)) {
                invalid("alpha", "catalog entry '" + hs.catalog + "' has degree -" + format_double(h.alpha()));
            }
            return h.with_sphere_stats(sphere_extrema(h, 720, config.seed));
        }
        HomogeneousFn h = from_expression(hs.expression, n, config.alpha);
        return h.with_sphere_stats(sphere_extrema(h, 720, config.seed));
    });

    PerturbationSpec pert = staged("perturbation", [&] {
        const auto& pc = config.perturbation;
        const auto dir = [&] { return Vector(Eigen::Map<const Vector>(pc.direction.data(), n)); };
        PerturbationSpec p;
        if (pc.kind == "none") return perturbation::none();
        if (pc.kind == "fixed_direction") p = perturbation::fixed_direction(dir(), pc.M, config.alpha, pc.delta);
        if (pc.kind == "rotational") p = perturbation::rotational(n, pc.M, config.alpha, pc.delta);
        if (pc.kind == "oscillating") p = perturbation::oscillating(dir(), pc.M, pc.omega, config.alpha, pc.delta);
        if (pc.kind == "custom") return perturbation::custom(pc.expression, pc.M, pc.delta, pc.r_star, pc.c_star);
        p.r_star = pc.r_star;
        p.c_star = pc.c_star;
        return p;
    });

    SystemSpec sys = staged("system", [&] { return make_system(std::move(sd), H, std::move(pert)); });
    return BuiltSystem{std::move(sys), std::move(H)};
}

namespace {

RunSummary summarize(const ExperimentConfig& config, const RunResult& r, const analysis::ExtinctionEstimate& T) {
    RunSummary s;
    s.t_star = T.T_star;
    s.t_star_err = T.err;
    s.Lambda = r.profile.Lambda;
    s.mu = r.profile.mu;
    s.xi_star = r.profile.xi_star;
    s.v_star = r.profile.v_star;
    s.eps_main = r.profile.eps_main;
    s.eps_ir = r.profile.eps_ir;
    s.eps_ry = r.profile.eps_ry;
    s.residual_xiHA = r.profile.residual_xiHA;
    s.fit_r2 = r.profile.fit_quality;
    s.status.state = r.report.passed() ? RunStatus::State::verified : RunStatus::State::failed;
    s.status.failed_clauses = r.report.failed_clauses();
    s.config_hash = config.hash;
    return s;
}

/// Copy of the trajectory with states expressed in the original coordinates.
Trajectory in_original_frame(const Trajectory& traj, const SpectralData& sd) {
    if (traj.coordinate_frame == Frame::original) return traj;
    Trajectory out = traj;
    out.coordinate_frame = Frame::original;
    for (auto& s : out.samples) {
        s.y = sd.S_inv * s.y;
        s.v = s.y / s.y.stableNorm();
    }
    return out;
}

std::string plot_data_csv(const Trajectory& original, const RunResult& r) {
    const auto& sd = r.built.sys.sd;
    const Matrix& R = sd.projections[static_cast<std::size_t>(r.match.index)];
    const double alpha = r.traj.alpha;
    std::string out = "log_remaining,log_norm_y,log_main_residual,log_ir_residual,log_ry_residual,lambda\n";
    const double shift = r.profile.T_star - r.traj.t_star_est;
    for (std::size_t i = 0; i < original.samples.size(); ++i) {
        const auto& s = original.samples[i];
        const double rem = s.remaining + shift;
        if (!(rem > 0.0)) continue;
        const Vector profile = std::pow(rem, 1.0 / alpha) * r.profile.xi_star;
        const Vector Ry = R * s.y;
        const double cols[] = {std::log(rem),
                               log_or_neg_inf(s.y.stableNorm()),
                               log_or_neg_inf((s.y - profile).stableNorm()),
                               log_or_neg_inf((s.y - Ry).stableNorm()),
                               log_or_neg_inf((Ry - profile).stableNorm()),
                               r.traj.samples[i].lambda};
        for (std::size_t c = 0; c < std::size(cols); ++c) {
            if (c) out += ',';
            out += format_double(cols[c]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const std::optional<std::filesystem::path>& out_dir) {
    BuiltSystem built = build_system(config);
    const SystemSpec& sys = built.sys;
    const bool z_frame = !sys.sd.is_symmetric;

    Trajectory traj = staged("dynamics", [&] {
        const Frame frame = z_frame ? Frame::z_coordinates : Frame::original;
        const auto& ic = config.integrator;
        if (ic.scheme == Scheme::reference) {
            oracle::ReferenceOptions ro;
            ro.rho_floor = ic.rho_floor;
            ro.frame = frame;
            return oracle::reference_integrate(sys, config.y0, config.t0, std::min(ic.rel_tol, 1e-10), ro);
        }
        IntegratorOptions opts;
        opts.rel_tol = ic.rel_tol;
        opts.abs_tol = ic.abs_tol;
        opts.rho_floor = ic.rho_floor;
        opts.max_steps = ic.max_steps;
        opts.frame = frame;
        return ic.scheme == Scheme::direct ? integrate_direct(sys, config.y0, config.t0, opts)
                                           : integrate_desingularized(sys, config.y0, config.t0, opts);
    });

    RunResult result{{}, std::move(built), std::move(traj), {}, {}, {}};
    analysis::ExtinctionEstimate T;
    staged("analysis", [&] {
        const auto& sd = result.built.sys.sd;
        T = analysis::estimate_extinction_time(result.traj);
        const auto series = analysis::dirichlet_quotient_series(result.traj, sd);
        result.match = analysis::identify_eigenvalue(series, sd, config.analysis.tail_fraction);
        analysis::ProfileOptions po;
        po.fit_decades = config.analysis.fit_decades;
        result.profile = analysis::estimate_profile(result.traj, T.T_star, sd, result.match, result.built.H, po);
        result.report = analysis::verify_main_theorem(result.profile, result.traj, result.built.H);
        return 0;
    });
    result.summary = summarize(config, result, T);

    if (out_dir) {
        staged("io", [&] {
            std::error_code ec;
            std::filesystem::create_directories(*out_dir, ec);
            if (ec) throw Error(ErrorKind::IoError, "cannot create " + out_dir->string() + ": " + ec.message());
            const Trajectory original = in_original_frame(result.traj, result.built.sys.sd);
            export_trajectory(original, *out_dir / "trajectory.csv");
            write_text(*out_dir / "summary.json", summary_to_json(result.summary));
            write_text(*out_dir / "plot_data.csv", plot_data_csv(original, result));
            return 0;
        });
    }
    return result;
}

RunSummary error_summary(const Error& e, const std::string& config_hash) {
    RunSummary s;
    s.t_star = std::numeric_limits<double>::quiet_NaN();
    s.t_star_err = std::numeric_limits<double>::quiet_NaN();
    s.Lambda = std::numeric_limits<double>::quiet_NaN();
    s.residual_xiHA = std::numeric_limits<double>::quiet_NaN();
    s.status.state = RunStatus::State::error;
    s.status.error_kind = std::string(to_string(e.kind()));
    if (const auto* se = dynamic_cast<const StageError*>(&e)) {
        s.status.error_stage = se->stage();
    } else if (e.kind() == ErrorKind::ConfigInvalid || e.kind() == ErrorKind::ParseError) {
        s.status.error_stage = "config";
    }
    s.status.error_message = e.what();
    s.config_hash = config_hash;
    return s;
}

std::string summary_to_json(const RunSummary& s) {
    json j;
    j["t_star"] = number_json(s.t_star);
    j["t_star_err"] = number_json(s.t_star_err);
    j["Lambda"] = number_json(s.Lambda);
    j["mu"] = number_json(s.mu);
    j["xi_star"] = vector_json(s.xi_star);
    j["v_star"] = vector_json(s.v_star);
    j["eps_main"] = number_json(s.eps_main);
    j["eps_ir"] = number_json(s.eps_ir);
    j["eps_ry"] = number_json(s.eps_ry);
    j["residual_xiHA"] = number_json(s.residual_xiHA);
    json r2 = json::object();
    for (const auto& [k, v] : s.fit_r2) r2[k] = number_json(v);
    j["fit_r2"] = r2;
    json status;
    status["state"] = state_name(s.status.state);
    if (s.status.state == RunStatus::State::failed) status["failed_clauses"] = s.status.failed_clauses;
    if (s.status.state == RunStatus::State::error) {
        status["kind"] = s.status.error_kind;
        status["stage"] = s.status.error_stage;
        status["message"] = s.status.error_message;
    }
    j["status"] = status;
    j["provenance"] = {{"config_hash", s.config_hash}, {"tool_version", s.tool_version}};
    return j.dump(2) + "\n";
}

std::vector<SweepEntry> sweep(const std::vector<std::filesystem::path>& configs, int parallelism,
                              const std::filesystem::path& out_dir) {
    std::vector<SweepEntry> entries(configs.size());
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < entries.size(); i = next++) {
            SweepEntry& e = entries[i];
            e.config_path = configs[i];
            e.name = configs[i].stem().string();
            char prefix[16];
            std::snprintf(prefix, sizeof prefix, "%03zu_", i);
            const auto run_dir = out_dir / (prefix + e.name);
            try {
                e.config = load_config(configs[i]);
                e.summary = run_experiment(*e.config, run_dir).summary;
            } catch (const Error& err) {
                e.summary = error_summary(err, e.config ? e.config->hash : "");
                std::filesystem::create_directories(run_dir, ec);
                try {
                    write_text(run_dir / "summary.json", summary_to_json(e.summary));
                } catch (const Error&) {
                }
            }
        }
    };
    const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(entries.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::string csv =
        "index,name,status,n,alpha,scheme,t_star,t_star_err,Lambda,xi_norm,residual_xiHA,eps_main,eps_ir,eps_ry,"
        "detail\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const auto& s = e.summary;
        const bool ok = s.status.state != RunStatus::State::error;
        std::string detail;
        if (s.status.state == RunStatus::State::error) detail = s.status.error_message;
        for (const auto& c : s.status.failed_clauses) detail += (detail.empty() ? "" : ";") + c;
        const auto num = [](double x) { return format_double(x); };
        csv += std::to_string(i) + "," + csv_field(e.name) + "," + state_name(s.status.state) + ",";
        csv += (e.config ? std::to_string(e.config->matrix.rows()) : "") + ",";
        csv += (e.config ? num(e.config->alpha) : "") + ",";
        csv += (e.config ? to_string(e.config->integrator.scheme) : "") + ",";
        csv += ok ? num(s.t_star) + "," + num(s.t_star_err) + "," + num(s.Lambda) + "," +
                        num(s.xi_star.stableNorm()) + "," + num(s.residual_xiHA) + "," + num(s.eps_main) + "," +
                        num(s.eps_ir) + "," + num(s.eps_ry)
                  : std::string(",,,,,,,");
        csv += "," + csv_field(detail) + "\n";
    }
    write_text(out_dir / "sweep.csv", csv);
    return entries;
}

void export_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    const Eigen::Index n = traj.samples.empty() ? 0 : traj.samples.front().y.size();
    std::string out = "t,rho,lambda";
    for (Eigen::Index i = 0; i < n; ++i) out += ",y_" + std::to_string(i);
    out += '\n';
    for (const auto& s : traj.samples) {
        out += format_double(s.t) + ',' + format_double(s.rho) + ',' + format_double(s.lambda);
        for (Eigen::Index i = 0; i < n; ++i) out += ',' + format_double(s.y(i));
        out += '\n';
    }
    write_text(path, out);
}

std::vector<TrajectoryRow> read_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, path.string() + ": empty file");
    const auto columns = static_cast<long>(std::count(line.begin(), line.end(), ',')) + 1;
    if (columns < 4 || line.rfind("t,rho,lambda,y_0", 0) != 0) {
        throw Error(ErrorKind::ParseError, path.string() + ": unexpected header");
    }
    std::vector<TrajectoryRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::vector<double> vals;
        const char* p = line.c_str();
        while (true) {
            char* end = nullptr;
            const double x = std::strtod(p, &end);
            if (end == p) throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(line_no) + ": bad number");
            vals.push_back(x);
            if (*end == ',') {
                p = end + 1;
            } else if (*end == '\0') {
                break;
            } else {
                throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(line_no) + ": bad separator");
            }
        }
        if (static_cast<long>(vals.size()) != columns) {
            throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(line_no) + ": wrong column count");
        }
        TrajectoryRow row{vals[0], vals[1], vals[2], Vector(columns - 3)};
        for (long i = 3; i < columns; ++i) row.y(i - 3) = vals[static_cast<std::size_t>(i)];
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    std::vector<std::filesystem::path> out;
    if (rc == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH) throw Error(ErrorKind::IoError, "glob failed for '" + pattern + "'");
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace extinct::io
