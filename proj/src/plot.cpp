#include <mfsg/error.hpp>
#include <mfsg/plot.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mfsg {

namespace {

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string label(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

void points_attr(std::ostream& out, const std::vector<double>& t, const std::vector<double>& v)
{
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (k) out << ' ';
        out << format_double(t[k]) << ',' << format_double(v[k]);
    }
}

} // namespace

CurvePath coefficient_path(const FitResult& fit, Index j, int points)
{
    if (points < 2) throw ConfigError("a curve path needs at least two points");
    if (j < 0 || j >= static_cast<Index>(fit.bases.size())) throw ConfigError("predictor index out of range");
    const BasisSystem& basis = fit.bases[j];
    CurvePath path;
    path.predictor = fit.predictor_names[j];
    const Interval d = basis.domain();
    path.t.resize(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k) path.t[k] = d.lo + d.width() * k / (points - 1);
    path.t.back() = d.hi;
    const Vector v = eval_curve(basis, fit.coefficient_block(j), path.t);
    path.value.assign(v.data(), v.data() + v.size());
    return path;
}

std::string render_coefficient_svg(const FitResult& fit, const TruthTable* truth, const PlotOptions& opt)
{
    if (opt.columns < 1 || opt.panel_width < 100 || opt.panel_height < 80) {
        throw ConfigError("plot layout is too small");
    }
    const Index p = static_cast<Index>(fit.bases.size());
    const Index active = static_cast<Index>(fit.active_set.size());
    const int cols = active == 0 ? 1 : static_cast<int>(std::min<Index>(opt.columns, active));
    const int rows = active == 0 ? 0 : static_cast<int>((active + cols - 1) / cols);
    const int footer = 40;
    const int width = cols * opt.panel_width;
    const int height = rows * opt.panel_height + footer;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    const double ml = 56, mr = 16, mt = 28, mb = 36;
    const double w = opt.panel_width - ml - mr;
    const double h = opt.panel_height - mt - mb;
    for (Index a = 0; a < active; ++a) {
        const Index j = fit.active_set[a];
        const CurvePath est = coefficient_path(fit, j, opt.points);
        const CurvePanel::Curve* tr = truth ? truth->find(est.predictor) : nullptr;

        double ymin = 0.0, ymax = 0.0;
        for (double v : est.value) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
        if (tr) {
            for (double v : tr->values) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
        }
        const double pad = ymax > ymin ? 0.05 * (ymax - ymin) : 1.0;
        ymin -= pad;
        ymax += pad;
        const double lo = est.t.front(), hi = est.t.back();
        const double x0 = (a % cols) * opt.panel_width + ml;
        const double y0 = static_cast<double>(a / cols) * opt.panel_height + mt;
        const double sx = w / (hi - lo), sy = h / (ymax - ymin);

        out << "<g class=\"panel\" data-predictor=\"" << escape(est.predictor) << "\">\n";
        out << "<text x=\"" << x0 << "\" y=\"" << y0 - 10 << "\" font-size=\"13\">" << escape(est.predictor)
            << " (norm " << label(fit.block_norms()(j)) << ")</text>\n";
        out << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << w << "\" height=\"" << h
            << "\" fill=\"none\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << x0 << "\" y=\"" << y0 + h + 16 << "\" text-anchor=\"middle\">" << label(lo)
            << "</text>\n";
        out << "<text x=\"" << x0 + w << "\" y=\"" << y0 + h + 16 << "\" text-anchor=\"middle\">"
            << label(hi) << "</text>\n";
        out << "<text x=\"" << x0 + w / 2 << "\" y=\"" << y0 + h + 30 << "\" text-anchor=\"middle\">t</text>\n";
        out << "<text x=\"" << x0 - 6 << "\" y=\"" << y0 + 4 << "\" text-anchor=\"end\">" << label(ymax)
            << "</text>\n";
        out << "<text x=\"" << x0 - 6 << "\" y=\"" << y0 + h << "\" text-anchor=\"end\">" << label(ymin)
            << "</text>\n";
        // Data coordinates: t maps left to right, value maps bottom to top.
        out << "<g transform=\"translate(" << format_double(x0) << ',' << format_double(y0 + h) << ") scale("
            << format_double(sx) << ',' << format_double(-sy) << ") translate(" << format_double(-lo) << ','
            << format_double(-ymin) << ")\" fill=\"none\">\n";
        out << "<line class=\"zero\" x1=\"" << format_double(lo) << "\" y1=\"0\" x2=\"" << format_double(hi)
            << "\" y2=\"0\" stroke=\"#999\" stroke-dasharray=\"4 3\" vector-effect=\"non-scaling-stroke\"/>\n";
        if (tr) {
            out << "<polyline class=\"truth\" stroke=\"#2a9d2a\" stroke-width=\"1.5\" "
                   "vector-effect=\"non-scaling-stroke\" points=\"";
            points_attr(out, tr->t, tr->values);
            out << "\"/>\n";
        }
        out << "<polyline class=\"estimate\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" "
               "vector-effect=\"non-scaling-stroke\" points=\"";
        points_attr(out, est.t, est.value);
        out << "\"/>\n</g>\n</g>\n";
    }

    const Index zero = p - active;
    out << "<text class=\"summary\" x=\"12\" y=\"" << rows * opt.panel_height + 24 << "\">";
    if (active == 0) {
        out << "All " << p << " coefficient curves are identically zero.";
    } else {
        out << zero << " of " << p << " coefficient curves are identically zero.";
    }
    out << "</text>\n</svg>\n";
    return out.str();
}

} // namespace mfsg
