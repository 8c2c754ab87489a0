#pragma once

#include <mfsg/basis.hpp>
#include <mfsg/dataset.hpp>
#include <mfsg/model.hpp>

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mfsg {

/**
 * Long-format curve table: one row per (sample_id, predictor_id, t, value).
 * Samples and predictors keep the order in which they first appear; each
 * curve is sorted by t after reading.
 */
struct CurvePanel {
    struct Curve {
        std::vector<double> t;
        std::vector<double> values;
    };

    std::vector<std::string> samples;
    std::vector<std::string> predictors;
    std::vector<std::vector<Curve>> curves;  // [sample][predictor]; empty if absent

    Index find_sample(const std::string& id) const;     // -1 if missing
    Index find_predictor(const std::string& id) const;  // -1 if missing
    Curve& at(const std::string& sample, const std::string& predictor);
};

struct ResponseTable {
    std::vector<std::string> samples;
    Vector y;
};

// Rows of a truth table (predictor_id, t, value), grouped by predictor.
struct TruthTable {
    std::vector<std::string> predictors;
    std::vector<CurvePanel::Curve> curves;

    const CurvePanel::Curve* find(const std::string& predictor) const;
};

// Readers throw InputError naming the source, row and column on any schema
// violation, unparsable or non-finite number, or duplicate key.
CurvePanel read_curve_panel(std::istream& in, const std::string& source = "<curves>");
ResponseTable read_responses(std::istream& in, const std::string& source = "<response>");
TruthTable read_truth_table(std::istream& in, const std::string& source = "<truth>");

CurvePanel read_curve_panel(const std::filesystem::path& path);
ResponseTable read_responses(const std::filesystem::path& path);
TruthTable read_truth_table(const std::filesystem::path& path);

void write_curve_panel(std::ostream& out, const CurvePanel& panel);
void write_responses(std::ostream& out, const ResponseTable& table);
void write_truth_table(std::ostream& out, const TruthTable& table);

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

struct BasisSpec {
    int order = 4;
    int size = 21;
    std::optional<Interval> domain;  // default: observed t range per predictor
};

// Project every curve onto its predictor's basis. Columns follow
// `response.samples`, whose ids must match the panel's exactly.
FunctionalDataset assemble_dataset(const CurvePanel& panel, const ResponseTable& response,
                                   const BasisSpec& spec);

// Project onto fixed bases (prediction). Predictors are matched by name;
// columns follow `samples`.
Matrix assemble_coords(const CurvePanel& panel, const std::vector<std::string>& samples,
                       const std::vector<std::string>& predictor_names,
                       const std::vector<BasisSystem>& bases);

// Versioned model document; coefficients in the original basis.
nlohmann::json model_to_json(const FitResult& fit);
FitResult model_from_json(const nlohmann::json& doc);
std::string dump_model(const FitResult& fit);  // canonical text, newline-terminated

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace mfsg
