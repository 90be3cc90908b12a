// sparselmi: batch front end for sparse controller design under multiplicative noise.
//
// Exit codes: 0 success, 1 usage or input error, 2 infeasible or unstable,
// 3 solver numerical failure.

#include "sparselmi/design.hpp"
#include "sparselmi/powergrid.hpp"
#include "sparselmi/report.hpp"
#include "sparselmi/sim.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace sparselmi;

namespace {

enum Exit { ok = 0, usage = 1, infeasible = 2, numerical = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Config {
    std::string system_path, network_path;
    std::string mode = "state";
    std::string time_domain;
    std::string objective = "lqrm";
    std::string q = "1", r = "1", sigma0;
    std::string reg = "row-norm";
    double gamma = 0.0;
    std::optional<double> mu;
    std::string reg_col = "col-norm", reg_row = "row-norm";
    double gamma_col = 0.0, gamma_row = 0.0;
    std::string grid = "0";
    std::optional<double> eps;
    double tau = 1e-3;
    double tol = 1e-8;
    std::optional<double> sigma_rel;
    std::string noise_sign = "printed";
    bool no_drift_input = false;
    std::uint64_t seed = 1;
    std::string out = ".";
    int jobs = 1;
    bool verbose = false;
    // check / simulate
    std::string k_path;
    double horizon = 10.0, dt = 1e-3;
    long steps = 100, paths = 1000, record_every = 10;
};

void add_problem_options(CLI::App* app, Config& c) {
    auto* sys = app->add_option("--system", c.system_path, "system JSON file");
    auto* net = app->add_option("--network", c.network_path, "network file");
    sys->excludes(net);
    app->add_option("--time-domain", c.time_domain, "override: continuous or discrete");
    app->add_option("--sigma0", c.sigma0, "initial covariance: scalar (times I) or CSV path");
    app->add_option("--sigma-rel", c.sigma_rel, "network: inertia noise as a fraction of 1/M for every generator");
    app->add_option("--noise-sign", c.noise_sign, "network: printed or physical")
        ->check(CLI::IsMember({"printed", "physical"}));
    app->add_flag("--no-drift-input", c.no_drift_input, "network: input enters through the noise terms only");
}

void add_design_options(CLI::App* app, Config& c) {
    app->add_option("--objective", c.objective, "lqrm or stabilize")->check(CLI::IsMember({"lqrm", "stabilize"}));
    app->add_option("--Q", c.q, "state weight: scalar (times I) or CSV path");
    app->add_option("--R", c.r, "input weight: scalar (times I) or CSV path");
    app->add_option("--reg", c.reg, "regularizer: none, row-norm, col-norm, row-gl, col-gl, row-sgl, col-sgl");
    app->add_option("--gamma", c.gamma, "regularizer weight");
    app->add_option("--mu", c.mu, "sparse group LASSO mixing in [0, 1]");
    app->add_option("--eps", c.eps, "strictness margin (default 1e-6 max(1, |A0|_inf))");
    app->add_option("--tau", c.tau, "relative support threshold");
    app->add_option("--tol", c.tol, "solver tolerance");
    app->add_option("--seed", c.seed, "random seed (default: SPARSELMI_SEED or 1)");
    app->add_option("--out", c.out, "output directory");
    app->add_flag("--verbose", c.verbose, "print solver iterations");
}

Matrix scaled_or_file(const std::string& spec, Eigen::Index n, const char* what) {
    try {
        return parse_double(spec) * Matrix::Identity(n, n);
    } catch (const std::exception&) {
    }
    Matrix m;
    try {
        m = read_matrix_csv(spec);
    } catch (const std::exception& e) {
        throw UsageError(std::string(what) + ": '" + spec + "' is neither a number nor a readable CSV (" + e.what() +
                         ")");
    }
    if (m.rows() != n || m.cols() != n)
        throw UsageError(std::string(what) + " must be " + std::to_string(n) + "x" + std::to_string(n));
    return m;
}

StochasticSystem load_system(const Config& c) {
    if (c.system_path.empty() == c.network_path.empty())
        throw UsageError("give exactly one of --system or --network");
    StochasticSystem sys;
    if (!c.system_path.empty()) {
        sys = read_system(c.system_path);
        if (c.sigma_rel) throw UsageError("--sigma-rel only applies to --network");
        if (c.no_drift_input) throw UsageError("--no-drift-input only applies to --network");
    } else {
        const GridNetwork net = read_network(c.network_path);
        for (const auto& w : validate_network(net)) std::cerr << "warning: " << w << "\n";
        SwingOptions so;
        so.sigma_rel = c.sigma_rel;
        so.noise_sign = c.noise_sign == "physical" ? NoiseSign::physical : NoiseSign::printed;
        so.drift_input = !c.no_drift_input;
        sys = build_swing_system(net, so);
    }
    if (!c.time_domain.empty()) sys.domain = parse_time_domain(c.time_domain);
    if (!c.sigma0.empty()) sys.sigma0 = scaled_or_file(c.sigma0, sys.states(), "Sigma0");
    validate(sys);
    return sys;
}

std::optional<LqrWeights> weights(const Config& c, const StochasticSystem& sys) {
    if (c.objective == "stabilize") return std::nullopt;
    return LqrWeights{scaled_or_file(c.q, sys.states(), "Q"), scaled_or_file(c.r, sys.inputs(), "R")};
}

RegularizerSpec reg_spec(const std::string& kind, double gamma, std::optional<double> mu) {
    RegularizerSpec s{parse_reg_kind(kind), gamma, mu};
    s.check();
    return s;
}

DesignOptions design_options(const Config& c) {
    DesignOptions o;
    o.eps = c.eps;
    o.tau = c.tau;
    o.solver.tolerance = c.tol;
    o.solver.verbose = c.verbose;
    return o;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    try {
        if (text.find(':') != std::string::npos) {
            const auto a = text.find(':'), b = text.find(':', a + 1);
            if (b == std::string::npos) throw UsageError("grid range must be start:step:stop");
            const double lo = parse_double(text.substr(0, a));
            const double step = parse_double(text.substr(a + 1, b - a - 1));
            const double hi = parse_double(text.substr(b + 1));
            if (!(step > 0.0)) throw UsageError("grid step must be positive");
            const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
            for (long k = 0; k <= count; ++k) grid.push_back(lo + static_cast<double>(k) * step);
        } else {
            std::size_t start = 0;
            while (start <= text.size()) {
                const auto pos = text.find(',', start);
                grid.push_back(parse_double(text.substr(start, pos == std::string::npos ? pos : pos - start)));
                if (pos == std::string::npos) break;
                start = pos + 1;
            }
        }
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw UsageError("cannot parse --grid '" + text + "': " + e.what());
    }
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (grid[k] < grid[k - 1]) throw UsageError("--grid must be sorted ascending");
    return grid;
}

Json config_json(const Config& c, const StochasticSystem& sys, const char* command) {
    Json j;
    j["command"] = command;
    j["system"] = c.system_path.empty() ? Json(nullptr) : Json(c.system_path);
    j["network"] = c.network_path.empty() ? Json(nullptr) : Json(c.network_path);
    j["mode"] = c.mode;
    j["time_domain"] = to_string(sys.domain);
    j["objective"] = c.objective;
    j["Q"] = c.q;
    j["R"] = c.r;
    j["Sigma0"] = c.sigma0.empty() ? Json(nullptr) : Json(c.sigma0);
    j["sigma_rel"] = c.sigma_rel ? Json(*c.sigma_rel) : Json(nullptr);
    j["noise_sign"] = c.noise_sign;
    j["drift_input"] = !c.no_drift_input;
    j["reg"] = c.reg;
    j["gamma"] = c.gamma;
    j["mu"] = c.mu ? Json(*c.mu) : Json(nullptr);
    j["reg_col"] = c.reg_col;
    j["gamma_col"] = c.gamma_col;
    j["reg_row"] = c.reg_row;
    j["gamma_row"] = c.gamma_row;
    j["grid"] = c.grid;
    j["eps"] = c.eps.value_or(default_eps(sys));
    j["tau"] = c.tau;
    j["tol"] = c.tol;
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    j["states"] = sys.states();
    j["inputs"] = sys.inputs();
    j["channels"] = sys.channels.size();
    return j;
}

fs::path out_dir(const Config& c) {
    fs::path p(c.out);
    fs::create_directories(p);
    return p;
}

int cmd_design(const Config& c) {
    const StochasticSystem sys = load_system(c);
    const auto w = weights(c, sys);
    const DesignOptions o = design_options(c);
    DesignResult res;
    if (c.mode == "state") {
        res = design_state_feedback(sys, w, reg_spec(c.reg, c.gamma, c.mu), o);
    } else {
        res = design_output_feedback(sys, w, reg_spec(c.reg_col, c.gamma_col, c.mu),
                                     reg_spec(c.reg_row, c.gamma_row, c.mu), o);
    }
    const fs::path dir = out_dir(c);
    Json report;
    report["config"] = config_json(c, sys, "design");
    report["result"] = design_to_json(res);
    write_text_file(dir / "design.json", report.dump(2) + "\n");
    write_matrix_csv(dir / "K.csv", res.K);
    if (res.C) write_matrix_csv(dir / "C.csv", *res.C);
    std::cout << "verified: margin " << format_double(res.oracle.margin);
    if (res.kappa) std::cout << ", kappa " << format_double(*res.kappa);
    if (res.oracle_cost) std::cout << ", cost " << format_double(*res.oracle_cost);
    std::cout << ", rows " << res.row_support.size() << "/" << res.K.rows();
    if (res.C) std::cout << ", outputs " << res.C->rows();
    std::cout << "\n";
    for (int i : res.unremovable_rows) std::cout << "note: row " << i << " is below tau but not removable\n";
    return ok;
}

int cmd_sweep(const Config& c) {
    const StochasticSystem sys = load_system(c);
    const auto w = weights(c, sys);
    if (!w) throw UsageError("sweep needs the lqrm objective");
    const auto grid = parse_grid(c.grid);
    const auto points = sweep_gamma(sys, *w, reg_spec(c.reg, c.gamma, c.mu), grid, design_options(c), c.jobs);
    const fs::path dir = out_dir(c);
    write_text_file(dir / "tradeoff.csv", tradeoff_csv(points));
    Json report;
    report["config"] = config_json(c, sys, "sweep");
    Json pts = Json::array();
    int code = ok;
    for (const auto& p : points) {
        Json jp;
        jp["gamma"] = p.gamma;
        jp["runtime_s"] = p.runtime;
        if (p.result) {
            jp["result"] = design_to_json(*p.result);
        } else {
            jp["error"] = p.error;
            std::cerr << "gamma " << format_double(p.gamma) << ": " << p.error << "\n";
            code = std::max(code, p.error.find("solver returned infeasible") != std::string::npos
                                      ? static_cast<int>(infeasible)
                                      : static_cast<int>(numerical));
        }
        pts.push_back(std::move(jp));
    }
    report["points"] = pts;
    write_text_file(dir / "sweep.json", report.dump(2) + "\n");
    std::cout << points.size() << " points written to " << (dir / "tradeoff.csv").string() << "\n";
    return code;
}

Matrix load_gain(const Config& c, const StochasticSystem& sys) {
    if (c.k_path.empty()) return Matrix::Zero(sys.inputs(), sys.states());
    const Matrix k = read_matrix_csv(c.k_path);
    if (k.rows() != sys.inputs() || k.cols() != sys.states())
        throw UsageError("K must be " + std::to_string(sys.inputs()) + "x" + std::to_string(sys.states()));
    return k;
}

int cmd_check(const Config& c) {
    const StochasticSystem sys = load_system(c);
    const Matrix k = load_gain(c, sys);
    const MsReport rep = ms_stable(sys, k);
    std::cout << (rep.stable ? "stable" : "unstable") << " margin " << format_double(rep.margin) << "\n";
    return rep.stable ? ok : infeasible;
}

int cmd_simulate(const Config& c) {
    const StochasticSystem sys = load_system(c);
    const Matrix k = load_gain(c, sys);
    SimOptions o;
    o.horizon = c.horizon;
    o.dt = c.dt;
    o.steps = c.steps;
    o.paths = c.paths;
    o.seed = c.seed;
    o.record_every = c.record_every;
    o.jobs = c.jobs;
    const EnsembleStats st = simulate(sys, k, o);
    for (const auto& w : st.warnings) std::cerr << "warning: " << w << "\n";
    const fs::path dir = out_dir(c);
    write_text_file(dir / "ensemble.csv", ensemble_to_csv(st));
    std::cout << "mean square " << format_double(st.mean_square.front()) << " -> "
              << format_double(st.mean_square.back()) << " (+- " << format_double(st.stderr_.back()) << ")\n";
    return ok;
}

int cmd_export(const Config& c) {
    const StochasticSystem sys = load_system(c);
    const auto w = weights(c, sys);
    const double eps = c.eps.value_or(default_eps(sys));
    LmiHandle h = w ? build_lqrm_sdp(sys, w->q, w->r, eps) : build_stability_lmi(sys, eps, 1.0);
    h = add_regularizer(std::move(h), reg_spec(c.reg, c.gamma, c.mu));
    const fs::path dir = out_dir(c);
    export_sdpa(h.program(), dir / "problem.dat-s");
    std::cout << "wrote " << (dir / "problem.dat-s").string() << "\n";
    return ok;
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("SPARSELMI_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw UsageError(std::string("SPARSELMI_SEED is not an unsigned integer: ") + env);
        }
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse controller design for linear systems with multiplicative noise"};
    app.require_subcommand(1);
    Config c;

    auto* design = app.add_subcommand("design", "synthesize a verified sparse gain");
    add_problem_options(design, c);
    add_design_options(design, c);
    design->add_option("--mode", c.mode, "state or output")->check(CLI::IsMember({"state", "output"}));
    design->add_option("--reg-col", c.reg_col, "output mode, phase 1 regularizer");
    design->add_option("--gamma-col", c.gamma_col, "output mode, phase 1 weight");
    design->add_option("--reg-row", c.reg_row, "output mode, phase 2 regularizer");
    design->add_option("--gamma-row", c.gamma_row, "output mode, phase 2 weight");

    auto* sweep = app.add_subcommand("sweep", "one design per gamma, tradeoff table");
    add_problem_options(sweep, c);
    add_design_options(sweep, c);
    sweep->add_option("--grid", c.grid, "start:step:stop or comma list");
    sweep->add_option("--jobs", c.jobs, "parallel design points")->check(CLI::PositiveNumber);

    auto* check = app.add_subcommand("check", "mean-square stability of a gain");
    add_problem_options(check, c);
    check->add_option("--K", c.k_path, "gain CSV (default zero)");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo second moments");
    add_problem_options(simulate, c);
    simulate->add_option("--K", c.k_path, "gain CSV (default zero)");
    simulate->add_option("--horizon", c.horizon, "continuous horizon");
    simulate->add_option("--dt", c.dt, "continuous step");
    simulate->add_option("--steps", c.steps, "discrete steps");
    simulate->add_option("--paths", c.paths, "sample paths")->check(CLI::PositiveNumber);
    simulate->add_option("--record-every", c.record_every, "keep every k-th time point")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", c.seed, "random seed (default: SPARSELMI_SEED or 1)");
    simulate->add_option("--jobs", c.jobs, "threads")->check(CLI::PositiveNumber);
    simulate->add_option("--out", c.out, "output directory");

    auto* exp = app.add_subcommand("export", "write the design SDP in SDPA sparse format");
    add_problem_options(exp, c);
    add_design_options(exp, c);

    try {
        c.seed = default_seed();
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : usage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    }

    try {
        if (*design) return cmd_design(c);
        if (*sweep) return cmd_sweep(c);
        if (*check) return cmd_check(c);
        if (*simulate) return cmd_simulate(c);
        if (*exp) return cmd_export(c);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const ModelError& e) {
        std::cerr << "error: invalid system:";
        for (const auto& v : e.violations()) std::cerr << "\n  " << v;
        std::cerr << "\n";
        return usage;
    } catch (const NetworkError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const DesignError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == DesignError::Kind::numerical ? numerical : infeasible;
    } catch (const NumericsError& e) {
        std::cerr << "error: numerical: " << e.what() << "\n";
        return numerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    }
    return usage;
}
