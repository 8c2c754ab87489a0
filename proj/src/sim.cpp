#include <mfsg/error.hpp>
#include <mfsg/parallel.hpp>
#include <mfsg/sim.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace mfsg {

void SimScenario::validate() const
{
    if (p < 3) throw ConfigError("the benchmark needs at least the three active predictors");
    if (fine_points < 1 || stride < 1 || fine_points % stride != 0) {
        throw ConfigError("fine grid size must be a positive multiple of the stride");
    }
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be >= 0");
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train_frac must lie in (0, 1)");
    if (num_train() < 2 || n - num_train() < 1) throw ConfigError("n too small for the split");
    if (fine_points / stride < basis_size) {
        throw ConfigError("fewer observed points than basis functions");
    }
}

Index SimScenario::num_train() const
{
    return static_cast<Index>(std::llround(train_frac * static_cast<double>(n)));
}

std::vector<double> SimScenario::fine_grid() const
{
    std::vector<double> t(static_cast<std::size_t>(fine_points));
    for (int i = 0; i < fine_points; ++i) t[i] = static_cast<double>(i + 1) / fine_points;
    return t;
}

std::vector<double> SimScenario::obs_grid() const
{
    std::vector<double> t;
    for (int i = stride; i <= fine_points; i += stride) t.push_back(static_cast<double>(i) / fine_points);
    return t;
}

double true_coefficient(Index j, double t)
{
    constexpr double pi = std::numbers::pi;
    switch (j) {
    case 0: return std::sin(1.5 * pi * t);
    case 1: return std::sin(2.5 * pi * t);
    case 2: return t * t;
    default: return 0.0;
    }
}

IndexSet true_active_set()
{
    return {0, 1, 2};
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

NormalStream::NormalStream(std::uint64_t seed) : engine_(seed) {}

double NormalStream::next()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
    // u1 in (0, 1] keeps the log finite.
    const double u1 = static_cast<double>((engine_() >> 11) + 1) * scale;
    const double u2 = static_cast<double>(engine_() >> 11) * scale;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

SimSample generate(const SimScenario& sc, int replicate, bool keep_raw, bool keep_fine)
{
    sc.validate();
    NormalStream normal(splitmix64(sc.seed + static_cast<std::uint64_t>(replicate)));
    const std::vector<double> fine = sc.fine_grid();
    const std::vector<double> obs = sc.obs_grid();
    const Index n = sc.n;
    const Index T = static_cast<Index>(obs.size());
    const Index F = sc.fine_points;
    const Index m = sc.basis_size;

    Matrix weights(3, F);  // Riemann weights beta^j(t'_k) / F
    for (Index j = 0; j < 3; ++j) {
        for (Index k = 0; k < F; ++k) weights(j, k) = true_coefficient(j, fine[k]) / static_cast<double>(F);
    }

    const BasisSystem basis = make_bspline_basis({0.0, 1.0}, sc.basis_order, sc.basis_size);
    const CurveProjector projector(basis, obs);

    SimRaw raw;
    raw.obs_grid = obs;
    if (keep_raw) raw.observed.assign(sc.p, Matrix(n, T));
    if (keep_fine) raw.fine.assign(sc.p, Matrix(n, F));
    raw.response.resize(n);
    raw.signal.resize(n);

    Matrix coords(sc.p * m, n);
    Vector path(F);
    std::vector<double> sampled(static_cast<std::size_t>(T));
    for (Index i = 0; i < n; ++i) {
        double signal = 0.0;
        for (int j = 0; j < sc.p; ++j) {
            double level = 0.0;
            for (Index k = 0; k < F; ++k) {
                level += normal.next();
                path(k) = level;
            }
            if (j < 3) signal += weights.row(j).dot(path);
            for (Index s = 0; s < T; ++s) sampled[s] = path((s + 1) * sc.stride - 1);
            coords.block(j * m, i, m, 1) = projector.project(sampled);
            if (keep_raw) {
                for (Index s = 0; s < T; ++s) raw.observed[j](i, s) = sampled[s];
            }
            if (keep_fine) raw.fine[j].row(i) = path.transpose();
        }
        raw.signal(i) = signal;
        raw.response(i) = signal + sc.sigma * normal.next();
    }

    std::vector<BasisSystem> bases(sc.p, basis);
    const Index n_train = sc.num_train();
    SimSample sample;
    sample.active = true_active_set();
    sample.train = make_dataset(bases, coords.leftCols(n_train), raw.response.head(n_train));
    sample.test = make_dataset(bases, coords.rightCols(n - n_train), raw.response.tail(n - n_train));
    if (keep_raw || keep_fine) sample.raw = std::move(raw);
    return sample;
}

Evaluation evaluate(const FitResult& fit, const FunctionalDataset& test, const IndexSet& truth)
{
    Evaluation ev;
    ev.rmse = rmse(fit.predict(test), test.response);
    const Index p = fit.layout().num_blocks;
    for (Index j = 0; j < p; ++j) {
        const bool selected = std::find(fit.active_set.begin(), fit.active_set.end(), j) !=
                              fit.active_set.end();
        const bool active = std::find(truth.begin(), truth.end(), j) != truth.end();
        if (active && selected) ++ev.active_correct;
        if (!active && !selected) ++ev.inactive_correct;
    }
    return ev;
}

std::string to_string(Method method)
{
    switch (method) {
    case Method::ols: return "ols";
    case Method::ridge: return "ridge";
    case Method::mfg_lasso: return "mfg-lasso";
    case Method::mfg_en: return "mfg-en";
    case Method::oracle: return "oracle";
    }
    return "unknown";
}

Method parse_method(const std::string& name)
{
    for (Method m : all_methods()) {
        if (to_string(m) == name) return m;
    }
    throw ConfigError("unknown method '" + name + "'");
}

std::vector<Method> all_methods()
{
    return {Method::ols, Method::ridge, Method::mfg_lasso, Method::mfg_en, Method::oracle};
}

const MethodSummary* ScenarioReport::find(Method method) const
{
    for (const auto& s : methods) {
        if (s.method == method) return &s;
    }
    return nullptr;
}

CvPlan study_plan()
{
    CvPlan plan;
    plan.lam_der_grid.pop_back();
    return plan;
}

FitResult fit_method(Method method, const SimSample& sample, const StudyConfig& config,
                     std::uint64_t cv_seed)
{
    CvPlan plan = config.plan;
    plan.seed = cv_seed;
    plan.threads = 1;
    switch (method) {
    case Method::ols: return fit_ols(sample.train);
    case Method::oracle: return fit_oracle(sample.train, sample.active);
    case Method::ridge:
        plan.alpha_grid = {1.0};
        plan.lam_der_grid = {0.0};
        return cross_validate(sample.train, plan, config.solver).fit;
    case Method::mfg_lasso:
        plan.alpha_grid = {0.0};
        return cross_validate(sample.train, plan, config.solver).fit;
    case Method::mfg_en:
        plan.alpha_grid = config.en_alpha_grid;
        return cross_validate(sample.train, plan, config.solver).fit;
    }
    throw ConfigError("unknown method");
}

namespace {

void summarize(MethodSummary& s, int active_size, int inactive_size)
{
    s.completed = 0;
    s.failed = 0;
    double sum = 0.0, sq = 0.0, act = 0.0, inact = 0.0;
    for (const auto& r : s.records) {
        if (!r.ok) {
            ++s.failed;
            continue;
        }
        ++s.completed;
        sum += r.eval.rmse;
        sq += r.eval.rmse * r.eval.rmse;
        act += r.eval.active_correct;
        inact += r.eval.inactive_correct;
    }
    if (s.completed == 0) return;
    const double c = s.completed;
    s.rmse_mean = sum / c;
    s.rmse_sd = s.completed > 1 ? std::sqrt(std::max(0.0, (sq - c * s.rmse_mean * s.rmse_mean) / (c - 1))) : 0.0;
    s.active_pct = active_size ? 100.0 * act / (c * active_size) : 100.0;
    s.inactive_pct = inactive_size ? 100.0 * inact / (c * inactive_size) : 100.0;
}

} // namespace

SimReport run_study(const StudyConfig& config)
{
    if (config.replications < 1) throw ConfigError("replications must be >= 1");
    if (config.methods.empty()) throw ConfigError("no methods requested");
    SimReport report;
    report.replications = config.replications;
    report.solver = to_string(config.solver);
    for (const SimScenario& sc : config.scenarios) {
        sc.validate();
        const std::size_t reps = static_cast<std::size_t>(config.replications);
        std::vector<std::vector<ReplicateRecord>> rows(reps);
        parallel_for(reps, config.threads, [&](std::size_t r) {
            const int rep = static_cast<int>(r);
            std::vector<ReplicateRecord> out;
            std::optional<SimSample> sample;
            std::string gen_error;
            try {
                sample = generate(sc, rep);
            } catch (const std::exception& e) {
                gen_error = e.what();
            }
            const std::uint64_t cv_seed = splitmix64(sc.seed ^ (0x5bd1e995ULL + r));
            for (Method method : config.methods) {
                ReplicateRecord rec;
                rec.replicate = rep;
                if (!sample) {
                    rec.error = gen_error;
                } else {
                    try {
                        const FitResult fit = fit_method(method, *sample, config, cv_seed);
                        rec.eval = evaluate(fit, sample->test, sample->active);
                        rec.chosen = fit.params;
                        rec.ok = true;
                    } catch (const std::exception& e) {
                        rec.error = e.what();
                    }
                }
                out.push_back(std::move(rec));
            }
            rows[r] = std::move(out);
        });
        ScenarioReport sr;
        sr.scenario = sc;
        const int active_size = static_cast<int>(true_active_set().size());
        for (std::size_t k = 0; k < config.methods.size(); ++k) {
            MethodSummary s;
            s.method = config.methods[k];
            for (std::size_t r = 0; r < reps; ++r) s.records.push_back(rows[r][k]);
            summarize(s, active_size, sc.p - active_size);
            sr.methods.push_back(std::move(s));
        }
        report.scenarios.push_back(std::move(sr));
    }
    return report;
}

nlohmann::json to_json(const SimReport& report)
{
    nlohmann::json doc;
    doc["format"] = "mfsg-sim-report";
    doc["version"] = 1;
    doc["replications"] = report.replications;
    doc["solver"] = report.solver;
    doc["scenarios"] = nlohmann::json::array();
    for (const auto& sr : report.scenarios) {
        const SimScenario& sc = sr.scenario;
        nlohmann::json js;
        js["scenario"] = {{"n", sc.n},
                          {"p", sc.p},
                          {"sigma", sc.sigma},
                          {"fine_points", sc.fine_points},
                          {"stride", sc.stride},
                          {"train_frac", sc.train_frac},
                          {"basis_order", sc.basis_order},
                          {"basis_size", sc.basis_size},
                          {"seed", sc.seed}};
        js["methods"] = nlohmann::json::array();
        for (const auto& s : sr.methods) {
            nlohmann::json jm;
            jm["method"] = to_string(s.method);
            jm["completed"] = s.completed;
            jm["failed"] = s.failed;
            jm["rmse_mean"] = s.rmse_mean;
            jm["rmse_sd"] = s.rmse_sd;
            jm["active_pct"] = s.active_pct;
            jm["inactive_pct"] = s.inactive_pct;
            jm["records"] = nlohmann::json::array();
            for (const auto& r : s.records) {
                nlohmann::json jr;
                jr["replicate"] = r.replicate;
                jr["ok"] = r.ok;
                if (r.ok) {
                    jr["rmse"] = r.eval.rmse;
                    jr["active_correct"] = r.eval.active_correct;
                    jr["inactive_correct"] = r.eval.inactive_correct;
                    jr["lambda"] = r.chosen.lambda;
                    jr["alpha"] = r.chosen.alpha;
                    jr["lambda_der"] = r.chosen.lambda_der;
                } else {
                    jr["error"] = r.error;
                }
                jm["records"].push_back(std::move(jr));
            }
            js["methods"].push_back(std::move(jm));
        }
        doc["scenarios"].push_back(std::move(js));
    }
    return doc;
}

SimReport report_from_json(const nlohmann::json& doc)
{
    if (doc.value("format", "") != "mfsg-sim-report") throw InputError("not a simulation report");
    if (doc.at("version").get<int>() != 1) throw InputError("unsupported report version");
    SimReport report;
    report.replications = doc.at("replications").get<int>();
    report.solver = doc.at("solver").get<std::string>();
    for (const auto& js : doc.at("scenarios")) {
        ScenarioReport sr;
        const auto& jsc = js.at("scenario");
        SimScenario& sc = sr.scenario;
        sc.n = jsc.at("n").get<Index>();
        sc.p = jsc.at("p").get<int>();
        sc.sigma = jsc.at("sigma").get<double>();
        sc.fine_points = jsc.at("fine_points").get<int>();
        sc.stride = jsc.at("stride").get<int>();
        sc.train_frac = jsc.at("train_frac").get<double>();
        sc.basis_order = jsc.at("basis_order").get<int>();
        sc.basis_size = jsc.at("basis_size").get<int>();
        sc.seed = jsc.at("seed").get<std::uint64_t>();
        for (const auto& jm : js.at("methods")) {
            MethodSummary s;
            s.method = parse_method(jm.at("method").get<std::string>());
            s.completed = jm.at("completed").get<int>();
            s.failed = jm.at("failed").get<int>();
            s.rmse_mean = jm.at("rmse_mean").get<double>();
            s.rmse_sd = jm.at("rmse_sd").get<double>();
            s.active_pct = jm.at("active_pct").get<double>();
            s.inactive_pct = jm.at("inactive_pct").get<double>();
            for (const auto& jr : jm.at("records")) {
                ReplicateRecord r;
                r.replicate = jr.at("replicate").get<int>();
                r.ok = jr.at("ok").get<bool>();
                if (r.ok) {
                    r.eval.rmse = jr.at("rmse").get<double>();
                    r.eval.active_correct = jr.at("active_correct").get<int>();
                    r.eval.inactive_correct = jr.at("inactive_correct").get<int>();
                    r.chosen = {jr.at("lambda").get<double>(), jr.at("alpha").get<double>(),
                                jr.at("lambda_der").get<double>()};
                } else {
                    r.error = jr.at("error").get<std::string>();
                }
                s.records.push_back(std::move(r));
            }
            sr.methods.push_back(std::move(s));
        }
        report.scenarios.push_back(std::move(sr));
    }
    return report;
}

namespace {

std::vector<Method> methods_in(const SimReport& report)
{
    std::vector<Method> out;
    for (const auto& sr : report.scenarios) {
        for (const auto& s : sr.methods) {
            if (std::find(out.begin(), out.end(), s.method) == out.end()) out.push_back(s.method);
        }
    }
    return out;
}

std::string cell(const char* fmt, double a, double b = 0.0)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, a, b);
    return buf;
}

std::string pad(const std::string& s, std::size_t width)
{
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

} // namespace

std::string format_selection_table(const SimReport& report)
{
    const auto methods = methods_in(report);
    std::ostringstream out;
    out << pad("sigma", 7) << pad("n", 6) << pad("selection", 11);
    for (Method m : methods) out << pad(to_string(m), 11);
    out << '\n';
    for (const auto& sr : report.scenarios) {
        for (int row = 0; row < 2; ++row) {
            out << pad(cell("%g", sr.scenario.sigma), 7)
                << pad(std::to_string(sr.scenario.n), 6) << pad(row ? "active" : "inactive", 11);
            for (Method m : methods) {
                const MethodSummary* s = sr.find(m);
                const bool have = s && s->completed > 0;
                const double v = have ? (row ? s->active_pct : s->inactive_pct) : 0.0;
                out << pad(have ? cell("%.0f", v) : "-", 11);
            }
            out << '\n';
        }
    }
    return out.str();
}

std::string format_rmse_table(const SimReport& report)
{
    const auto methods = methods_in(report);
    std::ostringstream out;
    out << pad("sigma", 7) << pad("n", 6);
    for (Method m : methods) out << pad(to_string(m), 15);
    out << '\n';
    for (const auto& sr : report.scenarios) {
        out << pad(cell("%g", sr.scenario.sigma), 7) << pad(std::to_string(sr.scenario.n), 6);
        for (Method m : methods) {
            const MethodSummary* s = sr.find(m);
            const bool have = s && s->completed > 0;
            out << pad(have ? cell("%.2f (%.2f)", s->rmse_mean, s->rmse_sd) : "-", 15);
        }
        out << '\n';
    }
    return out.str();
}

} // namespace mfsg
