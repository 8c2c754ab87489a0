#include <mfsg/error.hpp>
#include <mfsg/io.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace mfsg {

namespace {

// Minimal RFC 4180 reader: comma separated, optional double quotes with ""
// escapes, no embedded newlines.
class CsvReader {
public:
    CsvReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    // Reads the header and resolves `required` column names to positions.
    std::vector<std::size_t> header(const std::vector<std::string>& required)
    {
        std::vector<std::string> names;
        if (!next(names)) throw InputError(source_ + ": empty file, header row required");
        std::vector<std::size_t> pos;
        for (const auto& want : required) {
            const auto it = std::find(names.begin(), names.end(), want);
            if (it == names.end()) {
                throw InputError(source_ + ": header is missing column '" + want + "'");
            }
            pos.push_back(static_cast<std::size_t>(it - names.begin()));
        }
        width_ = names.size();
        names_ = std::move(names);
        return pos;
    }

    bool next(std::vector<std::string>& fields)
    {
        std::string line;
        while (std::getline(in_, line)) {
            ++row_;
            if (row_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            split(line, fields);
            if (width_ && fields.size() != width_) {
                throw InputError(where() + ": expected " + std::to_string(width_) + " fields, found " +
                                 std::to_string(fields.size()));
            }
            return true;
        }
        return false;
    }

    double number(const std::vector<std::string>& fields, std::size_t col) const
    {
        const std::string& text = fields[col];
        double value = 0.0;
        const char* first = text.data();
        const char* last = text.data() + text.size();
        if (first != last && *first == '+') ++first;
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (text.empty() || ec != std::errc() || ptr != last) {
            throw InputError(where(col) + ": cannot parse '" + text + "' as a number");
        }
        if (!std::isfinite(value)) throw InputError(where(col) + ": non-finite value '" + text + "'");
        return value;
    }

    const std::string& text(const std::vector<std::string>& fields, std::size_t col) const
    {
        if (fields[col].empty()) throw InputError(where(col) + ": empty identifier");
        return fields[col];
    }

    std::string where() const { return source_ + ": row " + std::to_string(row_); }
    std::string where(std::size_t col) const { return where() + ", column '" + names_[col] + "'"; }

private:
    void split(const std::string& line, std::vector<std::string>& fields) const
    {
        fields.clear();
        std::string cur;
        bool quoted = false;
        bool was_quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cur += c;
                }
            } else if (c == '"' && cur.find_first_not_of(" \t") == std::string::npos) {
                cur.clear();
                quoted = was_quoted = true;
            } else if (c == ',') {
                fields.push_back(finish(cur, was_quoted));
                cur.clear();
                was_quoted = false;
            } else {
                cur += c;
            }
        }
        if (quoted) throw InputError(where() + ": unterminated quote");
        fields.push_back(finish(cur, was_quoted));
    }

    static std::string finish(const std::string& s, bool was_quoted)
    {
        if (was_quoted) return s;
        const auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    }

    std::istream& in_;
    std::string source_;
    std::size_t row_ = 0;
    std::size_t width_ = 0;
    std::vector<std::string> names_;
};

std::string quote_if_needed(const std::string& s)
{
    const bool padded = !s.empty() && (s.front() == ' ' || s.back() == ' ');
    if (!padded && s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "' for reading");
    return in;
}

void sort_curve(CurvePanel::Curve& c, const std::string& label)
{
    std::vector<std::size_t> order(c.t.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return c.t[a] < c.t[b]; });
    CurvePanel::Curve sorted;
    for (auto k : order) {
        if (!sorted.t.empty() && sorted.t.back() == c.t[k]) {
            throw InputError(label + ": duplicate t = " + format_double(c.t[k]));
        }
        sorted.t.push_back(c.t[k]);
        sorted.values.push_back(c.values[k]);
    }
    c = std::move(sorted);
}

} // namespace

std::string format_double(double x)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

Index CurvePanel::find_sample(const std::string& id) const
{
    const auto it = std::find(samples.begin(), samples.end(), id);
    return it == samples.end() ? -1 : static_cast<Index>(it - samples.begin());
}

Index CurvePanel::find_predictor(const std::string& id) const
{
    const auto it = std::find(predictors.begin(), predictors.end(), id);
    return it == predictors.end() ? -1 : static_cast<Index>(it - predictors.begin());
}

CurvePanel::Curve& CurvePanel::at(const std::string& sample, const std::string& predictor)
{
    Index i = find_sample(sample);
    if (i < 0) {
        samples.push_back(sample);
        curves.emplace_back(predictors.size());
        i = static_cast<Index>(samples.size()) - 1;
    }
    Index j = find_predictor(predictor);
    if (j < 0) {
        predictors.push_back(predictor);
        for (auto& row : curves) row.resize(predictors.size());
        j = static_cast<Index>(predictors.size()) - 1;
    }
    return curves[i][j];
}

const CurvePanel::Curve* TruthTable::find(const std::string& predictor) const
{
    const auto it = std::find(predictors.begin(), predictors.end(), predictor);
    return it == predictors.end() ? nullptr : &curves[it - predictors.begin()];
}

CurvePanel read_curve_panel(std::istream& in, const std::string& source)
{
    CsvReader csv(in, source);
    const auto col = csv.header({"sample_id", "predictor_id", "t", "value"});
    CurvePanel panel;
    // Hash lookups keep ingestion linear in the row count.
    std::unordered_map<std::string, Index> sample_index, predictor_index;
    std::vector<std::string> fields;
    while (csv.next(fields)) {
        const std::string& s = csv.text(fields, col[0]);
        const std::string& p = csv.text(fields, col[1]);
        const double t = csv.number(fields, col[2]);
        const double v = csv.number(fields, col[3]);
        auto si = sample_index.find(s);
        if (si == sample_index.end()) {
            si = sample_index.emplace(s, static_cast<Index>(panel.samples.size())).first;
            panel.samples.push_back(s);
            panel.curves.emplace_back(panel.predictors.size());
        }
        auto pi = predictor_index.find(p);
        if (pi == predictor_index.end()) {
            pi = predictor_index.emplace(p, static_cast<Index>(panel.predictors.size())).first;
            panel.predictors.push_back(p);
            for (auto& row : panel.curves) row.resize(panel.predictors.size());
        }
        auto& curve = panel.curves[si->second][pi->second];
        curve.t.push_back(t);
        curve.values.push_back(v);
    }
    if (panel.samples.empty()) throw InputError(source + ": no data rows");
    for (std::size_t i = 0; i < panel.samples.size(); ++i) {
        for (std::size_t j = 0; j < panel.predictors.size(); ++j) {
            sort_curve(panel.curves[i][j], source + ": sample '" + panel.samples[i] + "', predictor '" +
                                               panel.predictors[j] + "'");
        }
    }
    return panel;
}

ResponseTable read_responses(std::istream& in, const std::string& source)
{
    CsvReader csv(in, source);
    const auto col = csv.header({"sample_id", "y"});
    ResponseTable table;
    std::vector<double> y;
    std::unordered_map<std::string, std::size_t> seen;
    std::vector<std::string> fields;
    while (csv.next(fields)) {
        const std::string& s = csv.text(fields, col[0]);
        if (!seen.emplace(s, table.samples.size()).second) {
            throw InputError(csv.where(col[0]) + ": duplicate sample_id '" + s + "'");
        }
        table.samples.push_back(s);
        y.push_back(csv.number(fields, col[1]));
    }
    if (table.samples.empty()) throw InputError(source + ": no data rows");
    table.y = Eigen::Map<const Vector>(y.data(), static_cast<Index>(y.size()));
    return table;
}

TruthTable read_truth_table(std::istream& in, const std::string& source)
{
    CsvReader csv(in, source);
    const auto col = csv.header({"predictor_id", "t", "value"});
    TruthTable table;
    std::vector<std::string> fields;
    while (csv.next(fields)) {
        const std::string& p = csv.text(fields, col[0]);
        auto it = std::find(table.predictors.begin(), table.predictors.end(), p);
        if (it == table.predictors.end()) {
            table.predictors.push_back(p);
            table.curves.emplace_back();
            it = table.predictors.end() - 1;
        }
        auto& c = table.curves[it - table.predictors.begin()];
        c.t.push_back(csv.number(fields, col[1]));
        c.values.push_back(csv.number(fields, col[2]));
    }
    for (std::size_t j = 0; j < table.curves.size(); ++j) {
        sort_curve(table.curves[j], source + ": predictor '" + table.predictors[j] + "'");
    }
    return table;
}

CurvePanel read_curve_panel(const std::filesystem::path& path)
{
    auto in = open_input(path);
    return read_curve_panel(in, path.string());
}

ResponseTable read_responses(const std::filesystem::path& path)
{
    auto in = open_input(path);
    return read_responses(in, path.string());
}

TruthTable read_truth_table(const std::filesystem::path& path)
{
    auto in = open_input(path);
    return read_truth_table(in, path.string());
}

void write_curve_panel(std::ostream& out, const CurvePanel& panel)
{
    out << "sample_id,predictor_id,t,value\n";
    for (std::size_t i = 0; i < panel.samples.size(); ++i) {
        const std::string s = quote_if_needed(panel.samples[i]);
        for (std::size_t j = 0; j < panel.predictors.size(); ++j) {
            const std::string p = quote_if_needed(panel.predictors[j]);
            const auto& c = panel.curves[i][j];
            for (std::size_t k = 0; k < c.t.size(); ++k) {
                out << s << ',' << p << ',' << format_double(c.t[k]) << ',' << format_double(c.values[k])
                    << '\n';
            }
        }
    }
}

void write_responses(std::ostream& out, const ResponseTable& table)
{
    out << "sample_id,y\n";
    for (std::size_t i = 0; i < table.samples.size(); ++i) {
        out << quote_if_needed(table.samples[i]) << ',' << format_double(table.y(static_cast<Index>(i)))
            << '\n';
    }
}

void write_truth_table(std::ostream& out, const TruthTable& table)
{
    out << "predictor_id,t,value\n";
    for (std::size_t j = 0; j < table.predictors.size(); ++j) {
        const auto& c = table.curves[j];
        for (std::size_t k = 0; k < c.t.size(); ++k) {
            out << quote_if_needed(table.predictors[j]) << ',' << format_double(c.t[k]) << ','
                << format_double(c.values[k]) << '\n';
        }
    }
}

namespace {

// Projects curves of one predictor, reusing the factorization while
// consecutive samples share a grid.
class PredictorProjector {
public:
    PredictorProjector(const BasisSystem& basis, std::string name) : basis_(basis), name_(std::move(name)) {}

    Vector project(const CurvePanel::Curve& c, const std::string& sample)
    {
        const std::string label = "sample '" + sample + "', predictor '" + name_ + "'";
        if (c.t.empty()) throw InputError(label + ": curve is missing");
        if (static_cast<Index>(c.t.size()) < basis_.num_functions()) {
            throw InputError(label + ": " + std::to_string(c.t.size()) + " observations, need at least " +
                             std::to_string(basis_.num_functions()));
        }
        for (double t : c.t) {
            if (!basis_.contains(t)) {
                throw InputError(label + ": t = " + format_double(t) + " lies outside the domain [" +
                                 format_double(basis_.domain().lo) + ", " +
                                 format_double(basis_.domain().hi) + "]");
            }
        }
        if (!projector_ || projector_->grid() != c.t) projector_.emplace(basis_, c.t, name_);
        return projector_->project(c.values);
    }

private:
    const BasisSystem& basis_;
    std::string name_;
    std::optional<CurveProjector> projector_;
};

} // namespace

Matrix assemble_coords(const CurvePanel& panel, const std::vector<std::string>& samples,
                       const std::vector<std::string>& predictor_names,
                       const std::vector<BasisSystem>& bases)
{
    if (predictor_names.size() != bases.size()) throw ConfigError("one basis per predictor required");
    for (const auto& p : panel.predictors) {
        if (std::find(predictor_names.begin(), predictor_names.end(), p) == predictor_names.end()) {
            throw InputError("predictor '" + p + "' is not part of the model");
        }
    }
    const Index m = bases.empty() ? 0 : bases.front().num_functions();
    Matrix coords(static_cast<Index>(bases.size()) * m, static_cast<Index>(samples.size()));
    for (std::size_t j = 0; j < bases.size(); ++j) {
        const Index pj = panel.find_predictor(predictor_names[j]);
        if (pj < 0) throw InputError("predictor '" + predictor_names[j] + "' has no curves");
        PredictorProjector projector(bases[j], predictor_names[j]);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const Index si = panel.find_sample(samples[i]);
            if (si < 0) throw InputError("sample '" + samples[i] + "' has no curves");
            coords.block(static_cast<Index>(j) * m, static_cast<Index>(i), m, 1) =
                projector.project(panel.curves[si][pj], samples[i]);
        }
    }
    return coords;
}

FunctionalDataset assemble_dataset(const CurvePanel& panel, const ResponseTable& response,
                                   const BasisSpec& spec)
{
    if (panel.samples.size() != response.samples.size()) {
        throw InputError("curve file has " + std::to_string(panel.samples.size()) +
                         " samples but response file has " + std::to_string(response.samples.size()));
    }
    for (const auto& s : response.samples) {
        if (panel.find_sample(s) < 0) throw InputError("sample '" + s + "' has a response but no curves");
    }
    std::vector<BasisSystem> bases;
    for (std::size_t j = 0; j < panel.predictors.size(); ++j) {
        Interval domain;
        if (spec.domain) {
            domain = *spec.domain;
        } else {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& row : panel.curves) {
                if (row[j].t.empty()) continue;
                lo = std::min(lo, row[j].t.front());
                hi = std::max(hi, row[j].t.back());
            }
            if (!(hi > lo)) {
                throw InputError("predictor '" + panel.predictors[j] + "' has a degenerate t range");
            }
            domain = {lo, hi};
        }
        bases.push_back(make_bspline_basis(domain, spec.order, spec.size));
    }
    Matrix coords = assemble_coords(panel, response.samples, panel.predictors, bases);
    return make_dataset(std::move(bases), std::move(coords), response.y, panel.predictors);
}

namespace {

using nlohmann::json;

json vector_json(const Eigen::Ref<const Vector>& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector json_vector(const json& j, Index expected, const std::string& what)
{
    const auto v = j.get<std::vector<double>>();
    if (static_cast<Index>(v.size()) != expected) {
        throw InputError("model: '" + what + "' has " + std::to_string(v.size()) + " entries, expected " +
                         std::to_string(expected));
    }
    return Eigen::Map<const Vector>(v.data(), expected);
}

// NaN objective values serialize as null.
double json_number(const json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

} // namespace

json model_to_json(const FitResult& fit)
{
    const BlockLayout lay = fit.layout();
    json predictors = json::array();
    for (Index j = 0; j < lay.num_blocks; ++j) {
        const BasisSystem& b = fit.bases[j];
        predictors.push_back({
            {"name", fit.predictor_names[j]},
            {"basis",
             {{"type", "bspline"},
              {"domain", {b.domain().lo, b.domain().hi}},
              {"order", b.order()},
              {"size", b.num_functions()},
              {"knots", b.knots()}}},
            {"coord_mean", vector_json(lay.block(fit.coord_means, j))},
            {"coefficients", vector_json(lay.block(fit.coefficients, j))},
        });
    }
    json active = json::array();
    for (Index j : fit.active_set) active.push_back(fit.predictor_names[j]);
    return {
        {"format", "mfsg-model"},
        {"version", 1},
        {"response_mean", fit.response_mean},
        {"predictors", predictors},
        {"active_set", active},
        {"penalty",
         {{"name", fit.penalty},
          {"lambda", fit.params.lambda},
          {"alpha", fit.params.alpha},
          {"lambda_der", fit.params.lambda_der}}},
        {"solver",
         {{"name", fit.solver},
          {"converged", fit.converged},
          {"iterations", fit.iterations},
          {"objective", fit.objective},
          {"rank_deficient", fit.rank_deficient}}},
        {"warnings", fit.warnings},
    };
}

FitResult model_from_json(const json& doc)
{
    try {
        if (!doc.is_object() || doc.value("format", "") != "mfsg-model") {
            throw InputError("not an mfsg model document");
        }
        if (doc.at("version").get<int>() != 1) throw InputError("unsupported model version");
        FitResult fit;
        const auto& preds = doc.at("predictors");
        if (!preds.is_array() || preds.empty()) throw InputError("model has no predictors");
        const Index p = static_cast<Index>(preds.size());
        const Index m = preds.front().at("basis").at("size").get<Index>();
        fit.coefficients.resize(p * m);
        fit.coord_means.resize(p * m);
        for (Index j = 0; j < p; ++j) {
            const auto& pj = preds[static_cast<std::size_t>(j)];
            const auto& bj = pj.at("basis");
            if (bj.at("type").get<std::string>() != "bspline") throw InputError("unknown basis type");
            const auto dom = bj.at("domain").get<std::vector<double>>();
            if (dom.size() != 2) throw InputError("basis domain needs two endpoints");
            BasisSystem basis = make_bspline_basis({dom[0], dom[1]}, bj.at("order").get<int>(),
                                                   bj.at("size").get<int>());
            if (basis.num_functions() != m) throw InputError("predictors differ in basis size");
            if (bj.contains("knots") && bj.at("knots").get<std::vector<double>>() != basis.knots()) {
                throw InputError("stored knots for '" + pj.at("name").get<std::string>() +
                                 "' do not match the basis specification");
            }
            fit.bases.push_back(std::move(basis));
            fit.predictor_names.push_back(pj.at("name").get<std::string>());
            fit.coefficients.segment(j * m, m) = json_vector(pj.at("coefficients"), m, "coefficients");
            fit.coord_means.segment(j * m, m) = json_vector(pj.at("coord_mean"), m, "coord_mean");
        }
        for (const auto& name : doc.at("active_set")) {
            const auto it =
                std::find(fit.predictor_names.begin(), fit.predictor_names.end(), name.get<std::string>());
            if (it == fit.predictor_names.end()) throw InputError("active predictor is not in the model");
            fit.active_set.push_back(static_cast<Index>(it - fit.predictor_names.begin()));
        }
        if (fit.active_set != nonzero_blocks(fit.coefficients, fit.layout())) {
            throw InputError("active set does not match the nonzero coefficient blocks");
        }
        fit.response_mean = doc.at("response_mean").get<double>();
        const auto& pen = doc.at("penalty");
        fit.penalty = pen.at("name").get<std::string>();
        fit.params = {pen.at("lambda").get<double>(), pen.at("alpha").get<double>(),
                      pen.at("lambda_der").get<double>()};
        const auto& sol = doc.at("solver");
        fit.solver = sol.at("name").get<std::string>();
        fit.converged = sol.at("converged").get<bool>();
        fit.iterations = sol.at("iterations").get<int>();
        fit.objective = json_number(sol.at("objective"));
        fit.rank_deficient = sol.value("rank_deficient", false);
        fit.warnings = doc.value("warnings", std::vector<std::string>{});
        return fit;
    } catch (const json::exception& e) {
        throw InputError(std::string("model: ") + e.what());
    } catch (const ConfigError& e) {
        throw InputError(std::string("model: ") + e.what());
    }
}

std::string dump_model(const FitResult& fit)
{
    return model_to_json(fit).dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw InputError("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path)
{
    auto in = open_input(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace mfsg
