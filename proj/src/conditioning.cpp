#include "scenealign/conditioning.hpp"

#include <cstdint>

#include "scenealign/qa.hpp"

namespace scenealign {

namespace {

uint64_t fnv1a(const uint8_t* data, size_t n) {
    uint64_t h = 1469598103934665603ULL;
    for (size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ULL;
    }
    return h;
}

int class_index(Shape s, ColorName c) {
    return static_cast<int>(s) * kColorCount + static_cast<int>(c);
}

void fill_relation_bins(float* bins, const std::vector<ObjectGroup>& groups,
                        const std::vector<RelationClause>& clauses) {
    for (const auto& clause : clauses) {
        const auto& subj = groups[clause.subject_group];
        const auto& obj = groups[clause.object_group];
        uint8_t key[6] = {static_cast<uint8_t>(subj.shape), static_cast<uint8_t>(subj.color),
                          static_cast<uint8_t>(clause.rel), static_cast<uint8_t>(obj.shape),
                          static_cast<uint8_t>(obj.color), static_cast<uint8_t>(clause.within)};
        bins[fnv1a(key, sizeof key) % ConditioningEncoder::kRelationBins] = 1.0f;
    }
}

}  // namespace

std::vector<float> ConditioningEncoder::encode(const SceneSpec& scene) const {
    std::vector<float> v(static_cast<size_t>(dim()), 0.0f);
    for (const auto& obj : scene.objects)
        v[class_index(obj.shape, obj.color)] += 1.0f / kMaxObjects;

    fill_relation_bins(v.data() + kHistogram, derive_groups(scene), derive_clauses(scene));

    float* cells = v.data() + kHistogram + kRelationBins;
    for (int i = 0; i < grid_ * grid_; ++i) cells[i * kCellSlots + kCellSlots - 1] = 1.0f;
    for (const auto& obj : scene.objects) {
        int cell = obj.cell.row * grid_ + obj.cell.col;
        cells[cell * kCellSlots + kCellSlots - 1] = 0.0f;
        cells[cell * kCellSlots + class_index(obj.shape, obj.color)] = 1.0f;
    }
    return v;
}

std::vector<float> ConditioningEncoder::encode_prompt(const PromptText& prompt) const {
    if (prompt.source_scene) return encode(*prompt.source_scene);
    std::vector<float> v(static_cast<size_t>(dim()), 0.0f);
    auto sem = parse_prompt(prompt.text);
    if (!sem || sem->empty_scene) return v;
    for (size_t g = 0; g < sem->groups.size(); ++g)
        v[class_index(sem->groups[g].shape, sem->groups[g].color)] +=
            static_cast<float>(sem->group_counts[g]) / kMaxObjects;
    fill_relation_bins(v.data() + kHistogram, sem->groups, sem->clauses);
    return v;
}

}  // namespace scenealign
