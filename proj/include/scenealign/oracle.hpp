#pragma once

#include <string>
#include <vector>

#include "scenealign/image.hpp"
#include "scenealign/qa.hpp"
#include "scenealign/scene.hpp"

namespace scenealign {

struct ParsedObject {
    Shape shape = Shape::circle;
    ColorName color = ColorName::red;
    Cell cell;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    Bitmap mask;
    double distortion_score = 0.0;
    int area = 0;
    // raw features, kept for diagnostics
    double fill_ratio = 0.0;
    double corner_occupancy = 0.0;
    double vertical_skew = 0.0;
};

struct ParsedScene {
    int canvas = 0;
    int grid = 0;
    std::vector<ParsedObject> objects;
    std::vector<Bitmap> unknown_regions;
};

// Geometry constants shared by the renderer and the parser. Both acceptance
// domains (64/4 and 32/2) use 16px cells, so one calibration covers both.
constexpr int kForegroundDistance = 60;    // RGB distance to background
constexpr int kMinComponentArea = 8;
constexpr int kMinObjectArea = 14;
constexpr int kMaxObjectArea = 340;
// tau_d: calibrated on a d=0 vs d>=0.8 sweep over both cell-16 domains;
// clean residuals top out at 0.057 and warped ones start at 0.15.
constexpr double kDistortionThreshold = 0.10;

// Connected-component perception oracle: classifies components by nearest
// palette color and geometric shape features; components that fail the
// plausibility gates land in unknown_regions.
ParsedScene oracle_parse(const Image& image, int grid);

// Grid inferred from the 16px cell convention (canvas/16).
ParsedScene oracle_parse(const Image& image);

// Answers the question list against the parsed image by exact predicates.
// Unanswerable questions get the token "none".
std::vector<std::string> oracle_answers(const ParsedScene& parsed,
                                        const std::vector<QAPair>& questions);
std::vector<std::string> oracle_answers(const Image& image, const std::vector<QAPair>& questions,
                                        int grid);

}  // namespace scenealign
