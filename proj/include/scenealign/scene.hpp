#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scenealign/image.hpp"

namespace scenealign {

enum class Shape : uint8_t { circle = 0, square = 1, triangle = 2 };
constexpr int kShapeCount = 3;

enum class ColorName : uint8_t {
    red = 0,
    green,
    blue,
    yellow,
    black,
    white,
    orange,
    purple
};
constexpr int kColorCount = 8;

struct Rgb {
    uint8_t r, g, b;
};

// Palette colors are pairwise far apart in RGB; the background is not a palette member.
const Rgb& palette_rgb(ColorName c);
constexpr Rgb kBackground{200, 200, 200};

const char* shape_name(Shape s);
std::string shape_plural(Shape s);
const char* color_name(ColorName c);
std::optional<Shape> shape_from_name(const std::string& name);      // accepts plural too
std::optional<ColorName> color_from_name(const std::string& name);

struct Cell {
    int row = 0;
    int col = 0;
    bool operator==(const Cell&) const = default;
};

struct SceneObject {
    int id = 0;
    Shape shape = Shape::circle;
    ColorName color = ColorName::red;
    Cell cell;
    double scale = 0.7;       // fraction of cell size, in [0.5, 0.9]
    double distortion = 0.0;  // in [0, 1]; 0 = canonical shape

    bool operator==(const SceneObject&) const = default;
};

constexpr int kMaxObjects = 6;

struct SceneSpec {
    int canvas = 64;  // square pixel resolution
    int grid = 4;     // G x G placement grid
    uint64_t seed = 0;
    std::vector<SceneObject> objects;

    int cell_size() const { return canvas / grid; }
    bool operator==(const SceneSpec&) const = default;
};

struct PromptText {
    std::string text;
    std::optional<SceneSpec> source_scene;
};

struct DomainConfig {
    int canvas = 64;
    int grid = 4;
};

// Throws on any invariant violation (duplicate cells, out-of-range fields, ...).
void validate_scene(const SceneSpec& scene);

// Deterministic scene sampler. Objects get distortion 0; scale is drawn on a
// hundredths lattice in [0.5, 0.9].
SceneSpec sample_scene(uint64_t rng_seed, int n_objects, const DomainConfig& cfg = {});

// Deterministic integer rasterizer. Bit-identical output for a fixed scene.
Image render(const SceneSpec& scene);

// --- prompt grammar ------------------------------------------------------

enum class RelationKind : uint8_t { left_of = 0, right_of, above, below };
const char* relation_phrase(RelationKind r);  // "to the left of", ...

// Objects grouped by (color, shape), in order of first appearance by id.
struct ObjectGroup {
    ColorName color;
    Shape shape;
    std::vector<int> ids;
    std::vector<Cell> cells;
};

// A verbalized spatial relation. Group form compares two groups with
// all-pairs separation; the within form states that two members of one group
// are ordered ("one X ... another X").
struct RelationClause {
    bool within = false;
    int subject_group = 0;
    int object_group = 0;  // ignored for within clauses
    RelationKind rel = RelationKind::left_of;
};

std::vector<ObjectGroup> derive_groups(const SceneSpec& scene);
std::vector<RelationClause> derive_clauses(const SceneSpec& scene);
std::string group_noun_phrase(const ObjectGroup& g);  // "red circle" / "red circles"

// Fixed template grammar over groups and relation clauses.
PromptText describe(const SceneSpec& scene);

// --- controlled misalignment injection ------------------------------------

enum class MisalignCategory : uint8_t {
    number_excess = 0,
    number_deficit,
    attribute,
    spatial,
    aesthetic
};
const char* misalign_category_name(MisalignCategory c);

struct GroundTruthMisalignment {
    MisalignCategory category;
    Shape shape = Shape::circle;
    int delta = 0;                       // number categories: +1 / -1
    std::string expected_token;          // attribute: expected color, etc.
    std::string observed_token;
    int target_id = -1;
    Cell from_cell{};
    Cell to_cell{};
};

struct PerturbResult {
    SceneSpec scene;
    GroundTruthMisalignment record;
};

// Returns a modified scene plus a record of exactly what changed. The prompt
// of the ORIGINAL scene paired with the render of the returned scene forms a
// misaligned test pair.
PerturbResult perturb(const SceneSpec& scene, MisalignCategory category, uint64_t rng_seed);

}  // namespace scenealign
