#include "scenealign/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "scenealign/error.hpp"

namespace scenealign {

namespace {

int color_distance2(const uint8_t* p, const Rgb& c) {
    int dr = int(p[0]) - c.r, dg = int(p[1]) - c.g, db = int(p[2]) - c.b;
    return dr * dr + dg * dg + db * db;
}

struct Component {
    std::vector<int> pixels;  // linear indices
    int min_x = 1 << 30, min_y = 1 << 30, max_x = -1, max_y = -1;
    long long sum_x = 0, sum_y = 0;
    long long sum_r = 0, sum_g = 0, sum_b = 0;
};

std::vector<Component> connected_components(const Image& img, const std::vector<uint8_t>& fg) {
    const int w = img.width, h = img.height;
    std::vector<int> label(static_cast<size_t>(w) * h, -1);
    std::vector<Component> comps;
    std::vector<int> stack;
    for (int start = 0; start < w * h; ++start) {
        if (!fg[start] || label[start] >= 0) continue;
        int id = static_cast<int>(comps.size());
        comps.emplace_back();
        Component& comp = comps.back();
        stack.push_back(start);
        label[start] = id;
        while (!stack.empty()) {
            int idx = stack.back();
            stack.pop_back();
            int x = idx % w, y = idx / w;
            comp.pixels.push_back(idx);
            comp.min_x = std::min(comp.min_x, x);
            comp.max_x = std::max(comp.max_x, x);
            comp.min_y = std::min(comp.min_y, y);
            comp.max_y = std::max(comp.max_y, y);
            comp.sum_x += x;
            comp.sum_y += y;
            const uint8_t* p = img.at(x, y);
            comp.sum_r += p[0];
            comp.sum_g += p[1];
            comp.sum_b += p[2];
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!dx && !dy) continue;
                    int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    int nidx = ny * w + nx;
                    if (fg[nidx] && label[nidx] < 0) {
                        label[nidx] = id;
                        stack.push_back(nidx);
                    }
                }
            }
        }
    }
    return comps;
}

// Canonical mask residual: area of the symmetric difference between the
// component and the best-fit canonical shape, normalized by component area.
// Pixel-center convention: a pixel (x, y) occupies (x + 0.5, y + 0.5).
double canonical_residual(const Component& comp, const std::vector<uint8_t>& member, int w,
                          int h, Shape shape) {
    const double area = static_cast<double>(comp.pixels.size());
    const double cx = static_cast<double>(comp.sum_x) / area + 0.5;
    const double cy = static_cast<double>(comp.sum_y) / area + 0.5;

    double r = 1.0, center_y = cy;
    switch (shape) {
        case Shape::circle: r = std::sqrt(area / 3.14159265358979323846); break;
        case Shape::square: r = std::sqrt(area) / 2.0; break;
        case Shape::triangle:
            r = std::sqrt(area / 2.0);
            center_y = cy - r / 3.0;  // triangle centroid sits below the shape center
            break;
    }

    auto inside = [&](double x, double y) {
        double dx = x - cx, dy = y - center_y;
        switch (shape) {
            case Shape::circle: return dx * dx + dy * dy <= r * r;
            case Shape::square: return std::abs(dx) <= r && std::abs(dy) <= r;
            case Shape::triangle: {
                double c0 = -r * (dy + r) - 2 * r * dx;
                double c1 = 2 * r * (dy - r);
                double c2 = -r * (dy - r) + 2 * r * (dx - r);
                return c0 <= 0 && c1 <= 0 && c2 <= 0;
            }
        }
        return false;
    };

    const int margin = static_cast<int>(std::ceil(r)) + 2;
    int x0 = comp.min_x - margin, x1 = comp.max_x + margin;
    int y0 = comp.min_y - margin, y1 = comp.max_y + margin;
    double mismatch = 0.0;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            bool in_canon = inside(x + 0.5, y + 0.5);
            bool in_comp =
                x >= 0 && y >= 0 && x < w && y < h && member[static_cast<size_t>(y) * w + x];
            if (in_canon != in_comp) mismatch += 1.0;
        }
    }
    return mismatch / area;
}

}  // namespace

ParsedScene oracle_parse(const Image& image, int grid) {
    if (image.width != image.height || grid < 1 || image.width % grid != 0)
        throw DimensionError("oracle_parse: unsupported image dimensions");
    const int cell = image.width / grid;
    if (cell < 8) throw DimensionError("oracle_parse: cell size below 8px");

    ParsedScene parsed;
    parsed.canvas = image.width;
    parsed.grid = grid;

    const int w = image.width, h = image.height;
    std::vector<uint8_t> fg(static_cast<size_t>(w) * h, 0);
    const int fg_thresh = kForegroundDistance * kForegroundDistance;
    for (int i = 0; i < w * h; ++i)
        fg[i] = color_distance2(image.pixels.data() + 3 * i, kBackground) > fg_thresh ? 1 : 0;

    // Plausible object extent scales with the cell size (calibrated at 16px).
    const double cell_scale = (cell * cell) / 256.0;
    const int min_area = std::max(kMinObjectArea, int(kMinObjectArea * cell_scale));
    const int max_area = int(kMaxObjectArea * cell_scale);
    const int max_extent = cell * 2;

    for (const auto& comp : connected_components(image, fg)) {
        const int area = static_cast<int>(comp.pixels.size());
        if (area < kMinComponentArea) continue;  // speckle

        Bitmap mask(w, h);
        std::vector<uint8_t> member(static_cast<size_t>(w) * h, 0);
        for (int idx : comp.pixels) {
            mask.bits[idx] = 1;
            member[idx] = 1;
        }

        const int bw = comp.max_x - comp.min_x + 1;
        const int bh = comp.max_y - comp.min_y + 1;
        const double mean_r = double(comp.sum_r) / area;
        const double mean_g = double(comp.sum_g) / area;
        const double mean_b = double(comp.sum_b) / area;

        int best_color = -1;
        double best_dist = 1e18;
        for (int c = 0; c < kColorCount; ++c) {
            const Rgb& rgb = palette_rgb(static_cast<ColorName>(c));
            double d = (mean_r - rgb.r) * (mean_r - rgb.r) + (mean_g - rgb.g) * (mean_g - rgb.g) +
                       (mean_b - rgb.b) * (mean_b - rgb.b);
            if (d < best_dist) {
                best_dist = d;
                best_color = c;
            }
        }

        bool plausible = area >= min_area && area <= max_area && bw <= max_extent &&
                         bh <= max_extent && best_dist <= 100.0 * 100.0;
        if (!plausible) {
            parsed.unknown_regions.push_back(std::move(mask));
            continue;
        }

        ParsedObject obj;
        obj.mask = std::move(mask);
        obj.area = area;
        obj.color = static_cast<ColorName>(best_color);
        obj.centroid_x = double(comp.sum_x) / area + 0.5;
        obj.centroid_y = double(comp.sum_y) / area + 0.5;
        obj.cell.col = std::clamp(int(obj.centroid_x) / cell, 0, grid - 1);
        obj.cell.row = std::clamp(int(obj.centroid_y) / cell, 0, grid - 1);

        obj.fill_ratio = double(area) / (double(bw) * bh);
        obj.vertical_skew = (obj.centroid_y - (comp.min_y + bh / 2.0)) / bh;

        // corner occupancy over the four k x k corner boxes of the bbox
        const int k = std::max(2, std::min(bw, bh) / 4);
        int corner_hits = 0;
        auto box_count = [&](int x0, int y0) {
            int n = 0;
            for (int y = y0; y < y0 + k; ++y)
                for (int x = x0; x < x0 + k; ++x)
                    if (x >= 0 && y >= 0 && x < w && y < h && member[size_t(y) * w + x]) ++n;
            return n;
        };
        corner_hits += box_count(comp.min_x, comp.min_y);
        corner_hits += box_count(comp.max_x - k + 1, comp.min_y);
        corner_hits += box_count(comp.min_x, comp.max_y - k + 1);
        corner_hits += box_count(comp.max_x - k + 1, comp.max_y - k + 1);
        obj.corner_occupancy = double(corner_hits) / (4.0 * k * k);

        // classify to the canonical shape with the smallest mask residual
        double best_res = 1e18;
        for (int s = 0; s < kShapeCount; ++s) {
            double res = canonical_residual(comp, member, w, h, static_cast<Shape>(s));
            if (res < best_res) {
                best_res = res;
                obj.shape = static_cast<Shape>(s);
            }
        }
        obj.distortion_score = best_res;
        parsed.objects.push_back(std::move(obj));
    }
    return parsed;
}

ParsedScene oracle_parse(const Image& image) {
    if (image.width % 16 != 0) throw DimensionError("oracle_parse: canvas not a multiple of 16");
    return oracle_parse(image, image.width / 16);
}

// --- question answering -------------------------------------------------------

namespace {

std::vector<int> objects_of_shape(const ParsedScene& parsed, Shape s) {
    std::vector<int> out;
    for (size_t i = 0; i < parsed.objects.size(); ++i)
        if (parsed.objects[i].shape == s) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> objects_of_class(const ParsedScene& parsed, const GroupRef& ref) {
    std::vector<int> out;
    for (size_t i = 0; i < parsed.objects.size(); ++i)
        if (parsed.objects[i].shape == ref.shape && parsed.objects[i].color == ref.color)
            out.push_back(static_cast<int>(i));
    return out;
}

bool cell_relation(const Cell& a, RelationKind rel, const Cell& b) {
    switch (rel) {
        case RelationKind::left_of: return a.col < b.col;
        case RelationKind::right_of: return a.col > b.col;
        case RelationKind::above: return a.row < b.row;
        case RelationKind::below: return a.row > b.row;
    }
    return false;
}

bool total_cell_separation(const ParsedScene& parsed, const std::vector<int>& subj,
                           RelationKind rel, const std::vector<int>& obj) {
    for (int i : subj)
        for (int j : obj)
            if (!cell_relation(parsed.objects[i].cell, rel, parsed.objects[j].cell)) return false;
    return true;
}

}  // namespace

std::vector<std::string> oracle_answers(const ParsedScene& parsed,
                                        const std::vector<QAPair>& questions) {
    std::vector<std::string> answers;
    answers.reserve(questions.size());
    for (const auto& qa : questions) {
        ParsedQuestion q = parse_question(qa.question);
        std::string ans = "none";
        switch (q.kind) {
            case ParsedQuestion::Kind::existence:
                ans = objects_of_class(parsed, q.subject).empty() ? "no" : "yes";
                break;
            case ParsedQuestion::Kind::count: {
                int n = static_cast<int>(objects_of_shape(parsed, q.subject.shape).size());
                ans = std::to_string(std::min(n, 6));
                break;
            }
            case ParsedQuestion::Kind::attribute: {
                auto idx = objects_of_shape(parsed, q.subject.shape);
                if (!idx.empty()) {
                    // majority color, ties broken by palette order
                    int counts[kColorCount] = {0};
                    for (int i : idx) counts[static_cast<int>(parsed.objects[i].color)]++;
                    int best = 0;
                    for (int c = 1; c < kColorCount; ++c)
                        if (counts[c] > counts[best]) best = c;
                    ans = color_name(static_cast<ColorName>(best));
                }
                break;
            }
            case ParsedQuestion::Kind::spatial_group: {
                auto subj = objects_of_class(parsed, q.subject);
                auto obj = objects_of_class(parsed, q.object);
                if (!subj.empty() && !obj.empty())
                    ans = total_cell_separation(parsed, subj, q.rel, obj) ? "yes" : "no";
                break;
            }
            case ParsedQuestion::Kind::spatial_within: {
                auto idx = objects_of_class(parsed, q.subject);
                if (idx.size() >= 2) {
                    bool found = false;
                    for (int i : idx)
                        for (int j : idx)
                            if (i != j && cell_relation(parsed.objects[i].cell, q.rel,
                                                        parsed.objects[j].cell))
                                found = true;
                    ans = found ? "yes" : "no";
                }
                break;
            }
            case ParsedQuestion::Kind::quality: {
                auto idx = objects_of_shape(parsed, q.subject.shape);
                if (!idx.empty()) {
                    bool all_ok = true;
                    for (int i : idx)
                        if (parsed.objects[i].distortion_score >= kDistortionThreshold)
                            all_ok = false;
                    ans = all_ok ? "yes" : "no";
                }
                break;
            }
            case ParsedQuestion::Kind::unknown:
                break;
        }
        answers.push_back(std::move(ans));
    }
    return answers;
}

std::vector<std::string> oracle_answers(const Image& image, const std::vector<QAPair>& questions,
                                        int grid) {
    return oracle_answers(oracle_parse(image, grid), questions);
}

}  // namespace scenealign
