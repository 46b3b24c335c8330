#include "scenealign/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "scenealign/error.hpp"
#include "scenealign/rng.hpp"

namespace scenealign {

namespace {

const Rgb kPalette[kColorCount] = {
    {255, 0, 0},      // red
    {0, 170, 0},      // green
    {0, 0, 255},      // blue
    {255, 255, 0},    // yellow
    {0, 0, 0},        // black
    {255, 255, 255},  // white
    {255, 140, 0},    // orange
    {150, 0, 200},    // purple
};

const char* kColorNames[kColorCount] = {"red",   "green", "blue",   "yellow",
                                        "black", "white", "orange", "purple"};
const char* kShapeNames[kShapeCount] = {"circle", "square", "triangle"};
const char* kCategoryNames[5] = {"number_excess", "number_deficit", "attribute", "spatial",
                                 "aesthetic"};
const char* kCountWords[7] = {"zero", "one", "two", "three", "four", "five", "six"};

// Inward-only four-lobe radial ripple, amplitude proportional to distortion.
// Q8 fixed point throughout so rasterization is pure integer math.
constexpr int64_t kRippleAmpQ8 = 128;  // 0.5 in Q8

}  // namespace

const Rgb& palette_rgb(ColorName c) { return kPalette[static_cast<int>(c)]; }
const char* shape_name(Shape s) { return kShapeNames[static_cast<int>(s)]; }
std::string shape_plural(Shape s) { return std::string(shape_name(s)) + "s"; }
const char* color_name(ColorName c) { return kColorNames[static_cast<int>(c)]; }
const char* misalign_category_name(MisalignCategory c) {
    return kCategoryNames[static_cast<int>(c)];
}

std::optional<Shape> shape_from_name(const std::string& name) {
    std::string n = name;
    if (!n.empty() && n.back() == 's') n.pop_back();
    for (int i = 0; i < kShapeCount; ++i)
        if (n == kShapeNames[i]) return static_cast<Shape>(i);
    return std::nullopt;
}

std::optional<ColorName> color_from_name(const std::string& name) {
    for (int i = 0; i < kColorCount; ++i)
        if (name == kColorNames[i]) return static_cast<ColorName>(i);
    return std::nullopt;
}

const char* relation_phrase(RelationKind r) {
    switch (r) {
        case RelationKind::left_of: return "to the left of";
        case RelationKind::right_of: return "to the right of";
        case RelationKind::above: return "above";
        case RelationKind::below: return "below";
    }
    return "";
}

void validate_scene(const SceneSpec& scene) {
    if (scene.grid < 1 || scene.canvas < 16 || scene.canvas % scene.grid != 0)
        throw DimensionError("scene: canvas must be a positive multiple of grid");
    if (scene.cell_size() < 8) throw DimensionError("scene: cell size below 8px");
    if (static_cast<int>(scene.objects.size()) > kMaxObjects)
        throw CapacityError("scene: more than " + std::to_string(kMaxObjects) + " objects");
    std::vector<int> seen(static_cast<size_t>(scene.grid) * scene.grid, 0);
    for (const auto& obj : scene.objects) {
        if (obj.cell.row < 0 || obj.cell.row >= scene.grid || obj.cell.col < 0 ||
            obj.cell.col >= scene.grid)
            throw RangeError("scene: object cell out of grid");
        int idx = obj.cell.row * scene.grid + obj.cell.col;
        if (seen[idx]++) throw RangeError("scene: two objects share a cell");
        if (obj.scale < 0.5 - 1e-9 || obj.scale > 0.9 + 1e-9)
            throw RangeError("scene: scale outside [0.5, 0.9]");
        if (obj.distortion < 0.0 || obj.distortion > 1.0)
            throw RangeError("scene: distortion outside [0, 1]");
    }
}

SceneSpec sample_scene(uint64_t rng_seed, int n_objects, const DomainConfig& cfg) {
    const int capacity = cfg.grid * cfg.grid;
    if (n_objects < 0) throw RangeError("sample_scene: negative object count");
    if (n_objects > capacity)
        throw CapacityError("sample_scene: " + std::to_string(n_objects) + " > " +
                            std::to_string(capacity) + " cells");
    if (n_objects > kMaxObjects)
        throw CapacityError("sample_scene: object count above cap of " +
                            std::to_string(kMaxObjects));

    Rng rng(Rng::mix(rng_seed, 0x5ce9e5ULL));
    SceneSpec scene;
    scene.canvas = cfg.canvas;
    scene.grid = cfg.grid;
    scene.seed = rng_seed;

    std::vector<uint8_t> occupied(static_cast<size_t>(capacity), 0);
    for (int i = 0; i < n_objects; ++i) {
        SceneObject obj;
        obj.id = i + 1;
        obj.shape = static_cast<Shape>(rng.bounded_int(kShapeCount));
        obj.color = static_cast<ColorName>(rng.bounded_int(kColorCount));
        int free_index = rng.bounded_int(capacity - i);
        for (int c = 0, seen_free = 0; c < capacity; ++c) {
            if (occupied[c]) continue;
            if (seen_free++ == free_index) {
                occupied[c] = 1;
                obj.cell = {c / cfg.grid, c % cfg.grid};
                break;
            }
        }
        obj.scale = 0.5 + 0.01 * rng.bounded_int(41);
        obj.distortion = 0.0;
        scene.objects.push_back(obj);
    }
    validate_scene(scene);
    return scene;
}

// --- rasterizer -----------------------------------------------------------

namespace {

bool inside_shape(Shape shape, int64_t x, int64_t y, int64_t r) {
    switch (shape) {
        case Shape::circle:
            return x * x + y * y <= r * r;
        case Shape::square:
            return std::abs(x) <= r && std::abs(y) <= r;
        case Shape::triangle: {
            // vertices: apex (0,-r), base (-r,r)..(r,r); y grows downward
            int64_t c0 = -r * (y + r) - 2 * r * x;
            int64_t c1 = 2 * r * (y - r);
            int64_t c2 = -r * (y - r) + 2 * r * (x - r);
            return c0 <= 0 && c1 <= 0 && c2 <= 0;
        }
    }
    return false;
}

}  // namespace

Image render(const SceneSpec& scene) {
    validate_scene(scene);
    Image img(scene.canvas, scene.canvas, kBackground.r, kBackground.g, kBackground.b);
    const int s = scene.cell_size();

    for (const auto& obj : scene.objects) {
        const Rgb& rgb = palette_rgb(obj.color);
        const int64_t scale_q8 = static_cast<int64_t>(std::lround(obj.scale * 256.0));
        const int64_t d_q8 = static_cast<int64_t>(std::lround(obj.distortion * 256.0));
        const int64_t r = scale_q8 * s / 2;  // half-extent in Q8
        const int64_t cx = static_cast<int64_t>(obj.cell.col) * s * 256 + s * 128;
        const int64_t cy = static_cast<int64_t>(obj.cell.row) * s * 256 + s * 128;

        int x0 = std::max<int>(0, static_cast<int>((cx - r) / 256) - 1);
        int x1 = std::min<int>(scene.canvas - 1, static_cast<int>((cx + r) / 256) + 1);
        int y0 = std::max<int>(0, static_cast<int>((cy - r) / 256) - 1);
        int y1 = std::min<int>(scene.canvas - 1, static_cast<int>((cy + r) / 256) + 1);

        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                int64_t px = static_cast<int64_t>(x) * 256 + 128 - cx;
                int64_t py = static_cast<int64_t>(y) * 256 + 128 - cy;
                if (d_q8 > 0) {
                    const int64_t rho2 = px * px + py * py;
                    if (rho2 > 0) {
                        // sin(4*theta) in Q8 from rational double-angle products
                        int64_t s4 = 4 * px * py * (px * px - py * py) * 256 / (rho2 * rho2);
                        int64_t factor = 256 + d_q8 * kRippleAmpQ8 * (256 + s4) / (2 * 256 * 256);
                        px = px * factor / 256;
                        py = py * factor / 256;
                    }
                }
                if (inside_shape(obj.shape, px, py, r)) {
                    uint8_t* p = img.at(x, y);
                    p[0] = rgb.r;
                    p[1] = rgb.g;
                    p[2] = rgb.b;
                }
            }
        }
    }
    return img;
}

// --- grammar ---------------------------------------------------------------

std::vector<ObjectGroup> derive_groups(const SceneSpec& scene) {
    std::vector<SceneObject> objs = scene.objects;
    std::sort(objs.begin(), objs.end(),
              [](const SceneObject& a, const SceneObject& b) { return a.id < b.id; });
    std::vector<ObjectGroup> groups;
    for (const auto& obj : objs) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const ObjectGroup& g) {
            return g.color == obj.color && g.shape == obj.shape;
        });
        if (it == groups.end()) {
            groups.push_back({obj.color, obj.shape, {obj.id}, {obj.cell}});
        } else {
            it->ids.push_back(obj.id);
            it->cells.push_back(obj.cell);
        }
    }
    return groups;
}

namespace {

bool total_separation(const std::vector<Cell>& subj, RelationKind rel,
                      const std::vector<Cell>& obj) {
    if (subj.empty() || obj.empty()) return false;
    auto max_of = [](const std::vector<Cell>& cs, bool col) {
        int m = INT32_MIN;
        for (const auto& c : cs) m = std::max(m, col ? c.col : c.row);
        return m;
    };
    auto min_of = [](const std::vector<Cell>& cs, bool col) {
        int m = INT32_MAX;
        for (const auto& c : cs) m = std::min(m, col ? c.col : c.row);
        return m;
    };
    switch (rel) {
        case RelationKind::left_of: return max_of(subj, true) < min_of(obj, true);
        case RelationKind::right_of: return min_of(subj, true) > max_of(obj, true);
        case RelationKind::above: return max_of(subj, false) < min_of(obj, false);
        case RelationKind::below: return min_of(subj, false) > max_of(obj, false);
    }
    return false;
}

bool exists_ordered_pair(const std::vector<Cell>& cells, RelationKind rel) {
    for (size_t i = 0; i < cells.size(); ++i) {
        for (size_t j = 0; j < cells.size(); ++j) {
            if (i == j) continue;
            bool ok = false;
            switch (rel) {
                case RelationKind::left_of: ok = cells[i].col < cells[j].col; break;
                case RelationKind::right_of: ok = cells[i].col > cells[j].col; break;
                case RelationKind::above: ok = cells[i].row < cells[j].row; break;
                case RelationKind::below: ok = cells[i].row > cells[j].row; break;
            }
            if (ok) return true;
        }
    }
    return false;
}

const RelationKind kRelationOrder[4] = {RelationKind::left_of, RelationKind::right_of,
                                        RelationKind::above, RelationKind::below};

}  // namespace

std::vector<RelationClause> derive_clauses(const SceneSpec& scene) {
    auto groups = derive_groups(scene);
    std::vector<RelationClause> clauses;
    if (scene.objects.size() < 2) return clauses;

    for (size_t i = 0; i + 1 < groups.size(); ++i) {
        // later group is the subject: "the blue square is to the left of the red circles"
        for (RelationKind rel : kRelationOrder) {
            if (total_separation(groups[i + 1].cells, rel, groups[i].cells)) {
                clauses.push_back({false, static_cast<int>(i + 1), static_cast<int>(i), rel});
                break;
            }
        }
    }
    if (clauses.empty()) {
        for (size_t i = 0; i < groups.size(); ++i) {
            if (groups[i].cells.size() < 2) continue;
            for (RelationKind rel : kRelationOrder) {
                if (exists_ordered_pair(groups[i].cells, rel)) {
                    clauses.push_back({true, static_cast<int>(i), static_cast<int>(i), rel});
                    break;
                }
            }
            if (!clauses.empty()) break;
        }
    }
    return clauses;
}

std::string group_noun_phrase(const ObjectGroup& g) {
    std::string np = std::string(color_name(g.color)) + " ";
    np += g.ids.size() > 1 ? shape_plural(g.shape) : shape_name(g.shape);
    return np;
}

PromptText describe(const SceneSpec& scene) {
    validate_scene(scene);
    PromptText prompt;
    prompt.source_scene = scene;
    if (scene.objects.empty()) {
        prompt.text = "an empty scene";
        return prompt;
    }
    auto groups = derive_groups(scene);
    std::string text;
    if (scene.objects.size() == 1) {
        text = "a " + group_noun_phrase(groups[0]);
    } else {
        for (size_t i = 0; i < groups.size(); ++i) {
            if (i) text += " and ";
            text += std::string(kCountWords[groups[i].ids.size()]) + " " +
                    group_noun_phrase(groups[i]);
        }
    }
    for (const auto& clause : derive_clauses(scene)) {
        const auto& subj = groups[clause.subject_group];
        if (clause.within) {
            std::string np = std::string(color_name(subj.color)) + " " + shape_name(subj.shape);
            text += "; one " + np + " is " + relation_phrase(clause.rel) + " another " + np;
        } else {
            const auto& obj = groups[clause.object_group];
            text += "; the " + group_noun_phrase(subj) +
                    (subj.ids.size() > 1 ? " are " : " is ") + relation_phrase(clause.rel) +
                    " the " + group_noun_phrase(obj);
        }
    }
    prompt.text = text;
    return prompt;
}

// --- perturbation ----------------------------------------------------------

namespace {

std::vector<Cell> free_cells(const SceneSpec& scene) {
    std::vector<uint8_t> occupied(static_cast<size_t>(scene.grid) * scene.grid, 0);
    for (const auto& obj : scene.objects) occupied[obj.cell.row * scene.grid + obj.cell.col] = 1;
    std::vector<Cell> out;
    for (int r = 0; r < scene.grid; ++r)
        for (int c = 0; c < scene.grid; ++c)
            if (!occupied[r * scene.grid + c]) out.push_back({r, c});
    return out;
}

int max_object_id(const SceneSpec& scene) {
    int m = 0;
    for (const auto& obj : scene.objects) m = std::max(m, obj.id);
    return m;
}

// True if every original group-form clause still holds after the edit.
bool clauses_preserved(const SceneSpec& original, const SceneSpec& edited) {
    auto orig_groups = derive_groups(original);
    auto edited_groups = derive_groups(edited);
    for (const auto& clause : derive_clauses(original)) {
        if (clause.within) continue;  // adding members cannot falsify an exists-pair
        auto find_cells = [&](const ObjectGroup& g) -> std::vector<Cell> {
            for (const auto& eg : edited_groups)
                if (eg.color == g.color && eg.shape == g.shape) return eg.cells;
            return {};
        };
        if (!total_separation(find_cells(orig_groups[clause.subject_group]), clause.rel,
                              find_cells(orig_groups[clause.object_group])))
            return false;
    }
    return true;
}

int count_shape(const SceneSpec& scene, Shape s) {
    int n = 0;
    for (const auto& obj : scene.objects)
        if (obj.shape == s) ++n;
    return n;
}

}  // namespace

PerturbResult perturb(const SceneSpec& scene, MisalignCategory category, uint64_t rng_seed) {
    validate_scene(scene);
    Rng rng(Rng::mix(rng_seed, 0xed17ULL + static_cast<uint64_t>(category)));
    PerturbResult result;
    result.scene = scene;
    result.record.category = category;

    switch (category) {
        case MisalignCategory::number_excess: {
            if (scene.objects.empty())
                throw ApplicabilityError("number_excess: no object class to duplicate");
            if (static_cast<int>(scene.objects.size()) >= kMaxObjects)
                throw ApplicabilityError("number_excess: scene already at object cap");
            auto free = free_cells(scene);
            if (free.empty()) throw ApplicabilityError("number_excess: no free cell");
            const auto& src = scene.objects[rng.bounded_int(static_cast<int>(scene.objects.size()))];

            // prefer a cell that leaves every verbalized relation intact
            std::vector<Cell> candidates;
            for (const auto& cell : free) {
                SceneSpec trial = scene;
                SceneObject extra = src;
                extra.id = max_object_id(scene) + 1;
                extra.cell = cell;
                extra.distortion = 0.0;
                trial.objects.push_back(extra);
                if (clauses_preserved(scene, trial)) candidates.push_back(cell);
            }
            if (candidates.empty()) candidates = free;

            SceneObject extra = src;
            extra.id = max_object_id(scene) + 1;
            extra.cell = candidates[rng.bounded_int(static_cast<int>(candidates.size()))];
            extra.scale = 0.5 + 0.01 * rng.bounded_int(41);
            extra.distortion = 0.0;
            result.scene.objects.push_back(extra);

            result.record.shape = src.shape;
            result.record.delta = +1;
            result.record.target_id = extra.id;
            result.record.to_cell = extra.cell;
            result.record.expected_token = std::to_string(count_shape(scene, src.shape));
            result.record.observed_token = std::to_string(count_shape(scene, src.shape) + 1);
            break;
        }
        case MisalignCategory::number_deficit: {
            if (scene.objects.empty())
                throw ApplicabilityError("number_deficit: nothing to remove");
            int idx = rng.bounded_int(static_cast<int>(scene.objects.size()));
            const SceneObject removed = scene.objects[idx];
            result.scene.objects.erase(result.scene.objects.begin() + idx);
            result.record.shape = removed.shape;
            result.record.delta = -1;
            result.record.target_id = removed.id;
            result.record.from_cell = removed.cell;
            result.record.expected_token = std::to_string(count_shape(scene, removed.shape));
            result.record.observed_token = std::to_string(count_shape(scene, removed.shape) - 1);
            break;
        }
        case MisalignCategory::attribute: {
            std::vector<int> unique_shape_idx;
            for (size_t i = 0; i < scene.objects.size(); ++i)
                if (count_shape(scene, scene.objects[i].shape) == 1)
                    unique_shape_idx.push_back(static_cast<int>(i));
            if (unique_shape_idx.empty())
                throw ApplicabilityError("attribute: no shape-unique object to recolor");
            int idx = unique_shape_idx[rng.bounded_int(static_cast<int>(unique_shape_idx.size()))];
            SceneObject& target = result.scene.objects[idx];
            ColorName old_color = target.color;
            ColorName next;
            do {
                next = static_cast<ColorName>(rng.bounded_int(kColorCount));
            } while (next == old_color);
            target.color = next;
            result.record.shape = target.shape;
            result.record.target_id = target.id;
            result.record.expected_token = color_name(old_color);
            result.record.observed_token = color_name(next);
            break;
        }
        case MisalignCategory::spatial: {
            auto clauses = derive_clauses(scene);
            auto groups = derive_groups(scene);
            auto free = free_cells(scene);
            if (free.empty()) throw ApplicabilityError("spatial: no free cell to move into");

            // shuffle clause order deterministically
            std::vector<size_t> order(clauses.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = i;
            for (size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.bounded(i)]);

            for (size_t ci : order) {
                const auto& clause = clauses[ci];
                if (clause.within) continue;
                const auto& subj = groups[clause.subject_group];
                const auto& obj = groups[clause.object_group];
                // move one subject member so the separation no longer holds
                for (size_t m = 0; m < subj.ids.size(); ++m) {
                    for (const auto& cell : free) {
                        std::vector<Cell> new_subj = subj.cells;
                        new_subj[m] = cell;
                        if (total_separation(new_subj, clause.rel, obj.cells)) continue;
                        int moved_id = subj.ids[m];
                        for (auto& o : result.scene.objects) {
                            if (o.id != moved_id) continue;
                            result.record.shape = o.shape;
                            result.record.target_id = o.id;
                            result.record.from_cell = o.cell;
                            result.record.to_cell = cell;
                            result.record.expected_token = relation_phrase(clause.rel);
                            result.record.observed_token = "violated";
                            o.cell = cell;
                            return result;
                        }
                    }
                }
            }
            throw ApplicabilityError("spatial: no verbalized relation can be violated");
        }
        case MisalignCategory::aesthetic: {
            if (scene.objects.empty()) throw ApplicabilityError("aesthetic: no object to distort");
            int idx = rng.bounded_int(static_cast<int>(scene.objects.size()));
            SceneObject& target = result.scene.objects[idx];
            target.distortion = 0.85 + 0.01 * rng.bounded_int(16);
            result.record.shape = target.shape;
            result.record.target_id = target.id;
            result.record.expected_token = "yes";
            result.record.observed_token = "no";
            break;
        }
    }
    validate_scene(result.scene);
    return result;
}

}  // namespace scenealign
