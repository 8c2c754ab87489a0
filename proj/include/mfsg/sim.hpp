#pragma once

#include <mfsg/dataset.hpp>
#include <mfsg/model.hpp>
#include <mfsg/tuning.hpp>

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mfsg {

/**
 * Brownian-path benchmark: p predictors generated on a fine grid, the first
 * three carrying smooth coefficient functions, observed on every `stride`-th
 * fine point and projected onto a cubic B-spline basis.
 */
struct SimScenario {
    Index n = 100;
    int p = 19;
    double sigma = 1.0;
    int fine_points = 500;
    int stride = 5;
    double train_frac = 0.8;
    int basis_order = 4;
    int basis_size = 21;
    std::uint64_t seed = 20240601;

    void validate() const;
    Index num_train() const;
    std::vector<double> fine_grid() const;  // i / fine_points, i = 1..fine_points
    std::vector<double> obs_grid() const;   // every stride-th fine point
};

// beta^1 = sin(3 pi t / 2), beta^2 = sin(5 pi t / 2), beta^3 = t^2, others 0.
double true_coefficient(Index j, double t);
IndexSet true_active_set();

// Sampled values kept for export and oracle checks.
struct SimRaw {
    std::vector<double> obs_grid;
    std::vector<Matrix> observed;  // per predictor: n x T values on obs_grid
    std::vector<Matrix> fine;      // per predictor: n x fine_points (if requested)
    Vector response;
    Vector signal;                 // noise-free part of the response
};

struct SimSample {
    FunctionalDataset train;  // raw, first num_train() samples
    FunctionalDataset test;   // raw, remaining samples
    IndexSet active;
    std::optional<SimRaw> raw;
};

// Replicate r draws from its own generator seeded by (seed, r).
SimSample generate(const SimScenario& scenario, int replicate, bool keep_raw = false,
                   bool keep_fine = false);

// Standard normals from 53-bit uniforms via Box-Muller (library-independent).
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed);
    double next();

private:
    std::mt19937_64 engine_;  // fully specified by the standard
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

struct Evaluation {
    double rmse = 0.0;
    int active_correct = 0;
    int inactive_correct = 0;
};

Evaluation evaluate(const FitResult& fit, const FunctionalDataset& test, const IndexSet& truth);

enum class Method { ols, ridge, mfg_lasso, mfg_en, oracle };

std::string to_string(Method method);
Method parse_method(const std::string& name);
std::vector<Method> all_methods();

// CV net used by the study: the default smoothing grid without its largest
// value, whose paths are orders of magnitude slower to converge.
CvPlan study_plan();

struct StudyConfig {
    std::vector<SimScenario> scenarios;
    std::vector<Method> methods = all_methods();
    int replications = 30;
    Solver solver = Solver::gmd;
    CvPlan plan = study_plan();                       // alpha grid is set per method
    std::vector<double> en_alpha_grid{0.25, 0.5, 0.75};
    int threads = 1;                                  // replicates in flight
};

struct ReplicateRecord {
    int replicate = 0;
    bool ok = false;
    std::string error;
    Evaluation eval;
    PenaltyParams chosen;
};

struct MethodSummary {
    Method method = Method::ols;
    int completed = 0;
    int failed = 0;
    double rmse_mean = 0.0;
    double rmse_sd = 0.0;
    double active_pct = 0.0;
    double inactive_pct = 0.0;
    std::vector<ReplicateRecord> records;
};

struct ScenarioReport {
    SimScenario scenario;
    std::vector<MethodSummary> methods;

    const MethodSummary* find(Method method) const;
};

struct SimReport {
    int replications = 0;
    std::string solver;
    std::vector<ScenarioReport> scenarios;
};

// Fit one method on a generated replicate.
FitResult fit_method(Method method, const SimSample& sample, const StudyConfig& config,
                     std::uint64_t cv_seed);

SimReport run_study(const StudyConfig& config);

nlohmann::json to_json(const SimReport& report);
SimReport report_from_json(const nlohmann::json& doc);

// Aligned text tables: selection percentages and test RMSE mean (SD).
std::string format_selection_table(const SimReport& report);
std::string format_rmse_table(const SimReport& report);

} // namespace mfsg
