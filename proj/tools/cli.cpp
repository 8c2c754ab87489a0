#include "cli.hpp"

#include <mfsg/error.hpp>
#include <mfsg/io.hpp>
#include <mfsg/plot.hpp>
#include <mfsg/sim.hpp>
#include <mfsg/tuning.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace mfsg::cli {

namespace {

namespace fs = std::filesystem;

// Raised for failures that map to exit code 3 without a library exception.
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Prints settings as a config file section, so a logged run can be replayed
// with --config.
class Resolved {
public:
    explicit Resolved(std::string section) : section_(std::move(section)) {}

    void add(const std::string& key, const std::string& value) { lines_.push_back(key + " = " + value); }
    void add(const std::string& key, double value) { add(key, format_double(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }
    void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
    void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
    void add_text(const std::string& key, const std::string& value) { add(key, "\"" + value + "\""); }
    void add(const std::string& key, const std::vector<double>& values)
    {
        std::string s = "[";
        for (std::size_t k = 0; k < values.size(); ++k) s += (k ? ", " : "") + format_double(values[k]);
        add(key, s + "]");
    }
    void add(const std::string& key, const std::vector<std::string>& values)
    {
        std::string s = "[";
        for (std::size_t k = 0; k < values.size(); ++k) s += (k ? ", \"" : "\"") + values[k] + "\"";
        add(key, s + "]");
    }
    void note(const std::string& text) { lines_.push_back("# " + text); }

    void print(std::ostream& out) const
    {
        out << "# resolved configuration\n[" << section_ << "]\n";
        for (const auto& l : lines_) out << l << '\n';
        out << '\n';
    }

private:
    std::string section_;
    std::vector<std::string> lines_;
};

// Options shared by the commands that tune a model.
struct TuningSettings {
    std::string solver = "gmd";
    int folds = 5;
    std::uint64_t seed = 1;
    int threads = 1;
    int grid_size = 100;
    double lambda_min_ratio = 0.01;
    std::vector<double> alpha_grid{0.25, 0.5, 0.75};
    std::vector<double> lambda_der_grid = default_lam_der_grid();

    void bind(CLI::App* cmd)
    {
        cmd->add_option("--solver", solver, "Penalized solver")->check(CLI::IsMember({"gmd", "admm"}));
        cmd->add_option("--cv-folds", folds, "Cross-validation folds")->check(CLI::Range(2, 1 << 20));
        cmd->add_option("--seed", seed, "Seed for the fold assignment");
        cmd->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));
        cmd->add_option("--grid-size", grid_size, "Lambda values per grid")->check(CLI::Range(2, 100000));
        cmd->add_option("--lambda-min-ratio", lambda_min_ratio, "Smallest lambda as a fraction of the largest")
            ->check(CLI::Range(1e-12, 1.0));
        cmd->add_option("--alpha-grid", alpha_grid, "Elastic-net mixing values tried by CV")->delimiter(',');
        cmd->add_option("--lambda-der-grid", lambda_der_grid, "Smoothing weights tried by CV")->delimiter(',');
    }

    void describe(Resolved& r) const
    {
        r.add_text("solver", solver);
        r.add("cv-folds", folds);
        r.add("seed", seed);
        r.add("threads", threads);
        r.add("grid-size", grid_size);
        r.add("lambda-min-ratio", lambda_min_ratio);
        r.add("alpha-grid", alpha_grid);
        r.add("lambda-der-grid", lambda_der_grid);
    }

    CvPlan plan() const
    {
        CvPlan p;
        p.folds = folds;
        p.seed = seed;
        p.threads = threads;
        p.lam_grid_size = grid_size;
        p.lambda_min_ratio = lambda_min_ratio;
        p.lam_der_grid = lambda_der_grid;
        return p;
    }
};

struct FitSettings {
    std::string curves, response, model, fitted;
    std::string penalty = "lasso";
    std::optional<double> lambda, alpha, lambda_der;
    bool one_se = false;
    int basis_order = 4;
    int basis_size = 21;
    std::vector<double> domain;
    double rho = 1.0;
    int admm_max_iter = 1000;
    TuningSettings tuning;
};

struct PredictSettings {
    std::string model, curves, response, output;
};

struct SimulateSettings {
    Index n = 100;
    int p = 19;
    double sigma = 1.0;
    int reps = 30;
    std::uint64_t scenario_seed = SimScenario{}.seed;
    std::vector<std::string> methods;
    std::string output, tables_path, export_dir;
    int export_replicate = 0;
    int replicate_threads = 1;
    TuningSettings tuning;
};

struct PlotSettings {
    std::string model, output, truth;
    int points = 200;
    int columns = 2;
};

void check_penalty_combination(const FitSettings& s)
{
    if (s.penalty == "lasso" && s.alpha && *s.alpha != 0.0) throw ConfigError("lasso fixes alpha = 0");
    if (s.penalty == "ridge" && s.alpha && *s.alpha != 1.0) throw ConfigError("ridge fixes alpha = 1");
    if (s.penalty == "ols" && (s.lambda || s.alpha || s.lambda_der)) {
        throw ConfigError("ols takes no penalty parameters");
    }
    if (s.penalty == "elastic-net" && s.lambda && !s.alpha) {
        throw ConfigError("elastic-net with an explicit --lambda also needs --alpha");
    }
    if (s.penalty == "elastic-net" && s.alpha && !(*s.alpha > 0.0 && *s.alpha < 1.0)) {
        throw ConfigError("elastic-net needs alpha strictly between 0 and 1");
    }
}

double penalty_alpha(const FitSettings& s)
{
    if (s.penalty == "ridge") return 1.0;
    if (s.penalty == "elastic-net") return s.alpha.value_or(0.5);
    return 0.0;
}

void print_summary(std::ostream& out, const FitResult& fit, const FunctionalDataset& data, const FitSettings& s)
{
    out << "solver: " << fit.solver << "\npenalty: " << fit.penalty << "\n";
    out << "lambda = " << format_double(fit.params.lambda) << ", alpha = " << format_double(fit.params.alpha)
        << ", lambda_der = " << format_double(fit.params.lambda_der) << "\n";
    const Vector norms = fit.block_norms();
    if (s.penalty == "ridge" || s.penalty == "ols") {
        out << "active set: none reported (no selection)\n";
    } else {
        out << "active set (" << fit.active_set.size() << " of " << fit.bases.size() << "):";
        for (Index j : fit.active_set) out << ' ' << fit.predictor_names[j];
        out << '\n';
    }
    out << "block norms:\n";
    for (std::size_t j = 0; j < fit.bases.size(); ++j) {
        out << "  " << fit.predictor_names[j] << ' ' << format_double(norms(static_cast<Index>(j))) << '\n';
    }
    out << "in-sample RMSE: " << format_double(rmse(fit.predict(data), data.response)) << '\n';
    for (const auto& w : fit.warnings) out << "warning: " << w << '\n';
}

int cmd_fit(const FitSettings& s, std::ostream& out)
{
    check_penalty_combination(s);
    const bool use_cv = s.penalty != "ols" && !s.lambda;
    const double alpha = penalty_alpha(s);

    Resolved r("fit");
    r.add_text("curves", s.curves);
    r.add_text("response", s.response);
    r.add_text("model", s.model);
    if (!s.fitted.empty()) r.add_text("fitted", s.fitted);
    r.add_text("penalty", s.penalty);
    r.add("basis-order", s.basis_order);
    r.add("basis-size", s.basis_size);
    if (s.domain.empty()) {
        r.note("domain: observed t range per predictor");
    } else {
        r.add("domain", s.domain);
    }
    s.tuning.describe(r);
    r.add("one-se", s.one_se);
    r.add("rho", s.rho);
    r.add("admm-max-iter", s.admm_max_iter);
    if (s.penalty != "ols") {
        if (use_cv) {
            r.note("lambda: selected by cross-validation");
            if (s.alpha || s.penalty != "elastic-net") r.add("alpha", alpha);
        } else {
            r.add("lambda", *s.lambda);
            r.add("alpha", alpha);
        }
        if (s.lambda_der || !use_cv) r.add("lambda-der", s.lambda_der.value_or(0.0));
    }
    r.print(out);

    BasisSpec spec{s.basis_order, s.basis_size, std::nullopt};
    if (!s.domain.empty()) {
        if (s.domain.size() != 2) throw ConfigError("--domain takes two values");
        spec.domain = Interval{s.domain[0], s.domain[1]};
    }
    const CurvePanel panel = read_curve_panel(fs::path(s.curves));
    const ResponseTable response = read_responses(fs::path(s.response));
    const FunctionalDataset data = assemble_dataset(panel, response, spec);
    out << "data: " << data.num_samples() << " samples, " << data.num_predictors() << " predictors, "
        << data.block_size() << " basis functions each\n";

    const Solver solver = parse_solver(s.tuning.solver);
    CvPlan plan = s.tuning.plan();
    plan.one_se = s.one_se;
    plan.admm_rho = s.rho;
    plan.admm_max_iter = s.admm_max_iter;

    FitResult fit;
    if (s.penalty == "ols") {
        fit = fit_ols(data);
        if (fit.rank_deficient) {
            throw NumericalFailure("OLS is not identifiable: " + fit.warnings.front() + "; " +
                                   std::to_string(data.num_samples()) + " samples for " +
                                   std::to_string(data.layout().total()) + " coefficients");
        }
    } else if (!use_cv) {
        fit = fit_penalized(data, {*s.lambda, alpha, s.lambda_der.value_or(0.0)}, solver, plan);
    } else {
        plan.alpha_grid = {alpha};
        if (s.penalty == "elastic-net" && !s.alpha) plan.alpha_grid = s.tuning.alpha_grid;
        if (s.lambda_der) plan.lam_der_grid = {*s.lambda_der};
        const CvResult cv = cross_validate(data, plan, solver);
        out << "cross-validation: " << plan.folds << " folds, best mean squared error "
            << format_double(cv.best_error) << '\n';
        for (const auto& w : cv.warnings) out << "warning: " << w << '\n';
        fit = cv.fit;
    }
    print_summary(out, fit, data, s);
    if (!fit.converged) {
        throw NumericalFailure("solver '" + fit.solver + "' did not converge in " +
                               std::to_string(fit.iterations) + " iterations; model not written");
    }
    write_text_file(s.model, dump_model(fit));
    out << "model written to " << s.model << '\n';
    if (!s.fitted.empty()) {
        const Vector yhat = fit.predict(data);
        std::ostringstream csv;
        csv << "sample_id,y,y_hat\n";
        for (Index i = 0; i < data.num_samples(); ++i) {
            csv << response.samples[i] << ',' << format_double(data.response(i)) << ',' << format_double(yhat(i))
                << '\n';
        }
        write_text_file(s.fitted, csv.str());
    }
    return ok;
}

int cmd_predict(const PredictSettings& s, std::ostream& out)
{
    Resolved r("predict");
    r.add_text("model", s.model);
    r.add_text("curves", s.curves);
    if (!s.response.empty()) r.add_text("response", s.response);
    r.add_text("output", s.output);
    r.print(out);

    const FitResult fit = model_from_json(nlohmann::json::parse(read_text_file(s.model), nullptr, false));
    const CurvePanel panel = read_curve_panel(fs::path(s.curves));
    std::vector<std::string> samples = panel.samples;
    std::optional<ResponseTable> response;
    if (!s.response.empty()) {
        response = read_responses(fs::path(s.response));
        if (response->samples.size() != panel.samples.size()) {
            throw InputError("curve and response files list different numbers of samples");
        }
        samples = response->samples;
    }
    const Matrix coords = assemble_coords(panel, samples, fit.predictor_names, fit.bases);
    const Vector yhat = fit.predict(coords);

    std::ostringstream csv;
    csv << (response ? "sample_id,y,y_hat\n" : "sample_id,y_hat\n");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        csv << samples[i] << ',';
        if (response) csv << format_double(response->y(static_cast<Index>(i))) << ',';
        csv << format_double(yhat(static_cast<Index>(i))) << '\n';
    }
    write_text_file(s.output, csv.str());
    out << "predicted " << samples.size() << " samples to " << s.output << '\n';
    if (response) out << "RMSE: " << format_double(rmse(yhat, response->y)) << '\n';
    return ok;
}

void export_replicate(const SimScenario& sc, int replicate, const fs::path& dir, std::ostream& out)
{
    fs::create_directories(dir);
    const SimSample sample = generate(sc, replicate, true);
    const SimRaw& raw = *sample.raw;
    const Index n_train = sc.num_train();
    auto write_split = [&](Index first, Index count, const std::string& stem) {
        CurvePanel panel;
        ResponseTable resp;
        for (Index i = first; i < first + count; ++i) {
            char id[32];
            std::snprintf(id, sizeof id, "s%04lld", static_cast<long long>(i + 1));
            resp.samples.push_back(id);
            for (int j = 0; j < sc.p; ++j) {
                auto& c = panel.at(id, "X" + std::to_string(j + 1));
                c.t = raw.obs_grid;
                const Vector row = raw.observed[j].row(i).transpose();
                c.values.assign(row.data(), row.data() + row.size());
            }
        }
        resp.y = raw.response.segment(first, count);
        std::ostringstream curves, response;
        write_curve_panel(curves, panel);
        write_responses(response, resp);
        write_text_file(dir / (stem + "_curves.csv"), curves.str());
        write_text_file(dir / (stem + "_response.csv"), response.str());
    };
    write_split(0, n_train, "train");
    write_split(n_train, sc.n - n_train, "test");

    TruthTable truth;
    const auto grid = sc.fine_grid();
    for (int j = 0; j < sc.p; ++j) {
        truth.predictors.push_back("X" + std::to_string(j + 1));
        CurvePanel::Curve c;
        for (double t : grid) {
            c.t.push_back(t);
            c.values.push_back(true_coefficient(j, t));
        }
        truth.curves.push_back(std::move(c));
    }
    std::ostringstream truth_csv;
    write_truth_table(truth_csv, truth);
    write_text_file(dir / "truth.csv", truth_csv.str());

    std::ostringstream cfg;
    cfg << "# basis used by the generator; pass with --config\n[fit]\n"
        << "basis-order = " << sc.basis_order << "\nbasis-size = " << sc.basis_size << "\ndomain = [0, 1]\n";
    write_text_file(dir / "fit.toml", cfg.str());
    out << "exported replicate " << replicate << " to " << dir.string() << '\n';
}

int cmd_simulate(const SimulateSettings& s, std::ostream& out)
{
    SimScenario sc;
    sc.n = s.n;
    sc.p = s.p;
    sc.sigma = s.sigma;
    sc.seed = s.scenario_seed;
    sc.validate();

    StudyConfig cfg;
    cfg.scenarios = {sc};
    cfg.replications = s.reps;
    cfg.solver = parse_solver(s.tuning.solver);
    cfg.plan = s.tuning.plan();
    cfg.en_alpha_grid = s.tuning.alpha_grid;
    cfg.threads = s.replicate_threads;
    cfg.methods.clear();
    for (const auto& m : s.methods) cfg.methods.push_back(parse_method(m));
    if (cfg.methods.empty()) cfg.methods = all_methods();
    std::vector<std::string> method_names;
    for (Method m : cfg.methods) method_names.push_back(to_string(m));

    Resolved r("simulate");
    r.add("n", static_cast<int>(s.n));
    r.add("p", s.p);
    r.add("sigma", s.sigma);
    r.add("reps", s.reps);
    r.add("scenario-seed", s.scenario_seed);
    r.add("method", method_names);
    r.add("replicate-threads", s.replicate_threads);
    s.tuning.describe(r);
    if (!s.output.empty()) r.add_text("output", s.output);
    if (!s.tables_path.empty()) r.add_text("tables", s.tables_path);
    if (!s.export_dir.empty()) {
        r.add_text("export", s.export_dir);
        r.add("export-replicate", s.export_replicate);
    }
    r.print(out);

    if (!s.export_dir.empty()) export_replicate(sc, s.export_replicate, s.export_dir, out);
    if (s.reps == 0) {
        if (s.export_dir.empty()) throw ConfigError("--reps 0 only makes sense with --export");
        return ok;
    }
    const SimReport report = run_study(cfg);
    const std::string tables = format_selection_table(report) + "\n" + format_rmse_table(report);
    out << tables;
    for (const auto& m : report.scenarios.front().methods) {
        for (const auto& rec : m.records) {
            if (!rec.ok) out << "warning: " << to_string(m.method) << " replicate " << rec.replicate << ": " << rec.error << '\n';
        }
    }
    if (!s.output.empty()) {
        write_text_file(s.output, to_json(report).dump(2) + "\n");
        out << "report written to " << s.output << '\n';
    }
    if (!s.tables_path.empty()) write_text_file(s.tables_path, tables);
    return ok;
}

int cmd_plot(const PlotSettings& s, std::ostream& out)
{
    Resolved r("plot");
    r.add_text("model", s.model);
    r.add_text("output", s.output);
    if (!s.truth.empty()) r.add_text("truth", s.truth);
    r.add("points", s.points);
    r.add("columns", s.columns);
    r.print(out);

    const FitResult fit = model_from_json(nlohmann::json::parse(read_text_file(s.model), nullptr, false));
    std::optional<TruthTable> truth;
    if (!s.truth.empty()) truth = read_truth_table(fs::path(s.truth));
    PlotOptions opt;
    opt.points = s.points;
    opt.columns = s.columns;
    write_text_file(s.output, render_coefficient_svg(fit, truth ? &*truth : nullptr, opt));
    out << "plot written to " << s.output << " (" << fit.active_set.size() << " panels)\n";
    return ok;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Multivariate functional group sparse regression", "mfsg"};
    app.set_config("--config", "", "Config file with [fit], [predict], [simulate] or [plot] sections");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    app.fallthrough();

    FitSettings fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model to curve and response files");
    fit_cmd->add_option("--curves", fit.curves, "Long-format curve CSV")->required();
    fit_cmd->add_option("--response", fit.response, "Response CSV (sample_id, y)")->required();
    fit_cmd->add_option("--model,-o", fit.model, "Output model file")->required();
    fit_cmd->add_option("--fitted", fit.fitted, "Optional CSV of in-sample fitted values");
    fit_cmd->add_option("--penalty", fit.penalty, "Penalty family")
        ->check(CLI::IsMember({"lasso", "elastic-net", "ridge", "ols"}));
    fit_cmd->add_option("--lambda", fit.lambda, "Penalty level; omit to cross-validate")->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--alpha", fit.alpha, "Elastic-net mixing weight")->check(CLI::Range(0.0, 1.0));
    fit_cmd->add_option("--lambda-der", fit.lambda_der, "Roughness penalty weight")->check(CLI::NonNegativeNumber);
    fit_cmd->add_flag("--one-se", fit.one_se, "Pick the largest lambda within one standard error");
    fit_cmd->add_option("--basis-order", fit.basis_order, "B-spline order")->check(CLI::Range(1, 20));
    fit_cmd->add_option("--basis-size", fit.basis_size, "Basis functions per predictor")->check(CLI::Range(1, 10000));
    fit_cmd->add_option("--domain", fit.domain, "Basis domain (lo hi)")->expected(2);
    fit_cmd->add_option("--rho", fit.rho, "ADMM step parameter")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--admm-max-iter", fit.admm_max_iter, "ADMM iteration cap")->check(CLI::Range(1, 100000000));
    fit.tuning.bind(fit_cmd);

    PredictSettings pred;
    auto* pred_cmd = app.add_subcommand("predict", "Predict responses from a saved model");
    pred_cmd->add_option("--model", pred.model, "Model file")->required();
    pred_cmd->add_option("--curves", pred.curves, "Long-format curve CSV")->required();
    pred_cmd->add_option("--response", pred.response, "Optional response CSV; enables RMSE");
    pred_cmd->add_option("--output,-o", pred.output, "Prediction CSV")->required();

    SimulateSettings sim;
    sim.tuning.lambda_der_grid = study_plan().lam_der_grid;
    auto* sim_cmd = app.add_subcommand("simulate", "Run the Brownian-path benchmark study");
    sim_cmd->add_option("--n", sim.n, "Samples per replicate")->check(CLI::Range(3, 10000000));
    sim_cmd->add_option("--p", sim.p, "Functional predictors")->check(CLI::Range(3, 100000));
    sim_cmd->add_option("--sigma", sim.sigma, "Noise standard deviation")->check(CLI::NonNegativeNumber);
    sim_cmd->add_option("--reps", sim.reps, "Replications")->check(CLI::Range(0, 100000));
    sim_cmd->add_option("--scenario-seed", sim.scenario_seed, "Seed of the data generator");
    sim_cmd->add_option("--method", sim.methods, "Methods (ols, ridge, mfg-lasso, mfg-en, oracle)")
        ->delimiter(',');
    sim_cmd->add_option("--replicate-threads", sim.replicate_threads, "Replicates run concurrently")
        ->check(CLI::Range(1, 1024));
    sim_cmd->add_option("--output,-o", sim.output, "JSON report path");
    sim_cmd->add_option("--tables", sim.tables_path, "Text tables path");
    sim_cmd->add_option("--export", sim.export_dir, "Directory for one replicate's CSV files");
    sim_cmd->add_option("--export-replicate", sim.export_replicate, "Replicate to export")->check(CLI::NonNegativeNumber);
    sim.tuning.bind(sim_cmd);

    PlotSettings plot;
    auto* plot_cmd = app.add_subcommand("plot", "Draw estimated coefficient curves as SVG");
    plot_cmd->add_option("--model", plot.model, "Model file")->required();
    plot_cmd->add_option("--output,-o", plot.output, "SVG path")->required();
    plot_cmd->add_option("--truth", plot.truth, "Truth table CSV (predictor_id, t, value)");
    plot_cmd->add_option("--points", plot.points, "Evaluation points per curve")->check(CLI::Range(2, 100000));
    plot_cmd->add_option("--columns", plot.columns, "Panels per row")->check(CLI::Range(1, 64));

    std::vector<std::string> argv_store{"mfsg"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : input_error;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit, out);
        if (*pred_cmd) return cmd_predict(pred, out);
        if (*sim_cmd) return cmd_simulate(sim, out);
        if (*plot_cmd) return cmd_plot(plot, out);
    } catch (const NumericalFailure& e) {
        err << "error: " << e.what() << '\n';
        return numerical_error;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return numerical_error;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return input_error;
    } catch (const DomainError& e) {
        err << "input error: " << e.what() << '\n';
        return input_error;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return input_error;
    } catch (const fs::filesystem_error& e) {
        err << "input error: " << e.what() << '\n';
        return input_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return failure;
    }
    return failure;
}

} // namespace mfsg::cli
