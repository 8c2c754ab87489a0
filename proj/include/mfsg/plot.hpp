#pragma once

#include <mfsg/io.hpp>
#include <mfsg/model.hpp>

#include <string>
#include <vector>

namespace mfsg {

struct PlotOptions {
    int points = 200;  // evaluation points per curve, endpoints included
    int columns = 2;
    int panel_width = 360;
    int panel_height = 240;
};

struct CurvePath {
    std::string predictor;
    std::vector<double> t;
    std::vector<double> value;
};

// Estimated coefficient function of predictor j on an even grid over its domain.
CurvePath coefficient_path(const FitResult& fit, Index j, int points = 200);

/**
 * One panel per active predictor with the estimate drawn as a polyline in
 * data coordinates (the panel transform maps them to the page), optional
 * truth overlay, and a footer counting the identically zero curves.
 */
std::string render_coefficient_svg(const FitResult& fit, const TruthTable* truth = nullptr,
                                   const PlotOptions& options = {});

} // namespace mfsg
