#pragma once

#include <string>
#include <vector>

#include "scenealign/scene.hpp"

namespace scenealign {

// Scene/prompt -> fixed-length conditioning vector. Three concatenated blocks:
//   [0, 24)                per-(shape,color) count histogram, counts / 6
//   [24, 88)               relation indicators, clause triples hashed into 64 bins
//   [88, 88 + G*G*25)      per-cell content map (24 class slots + 1 empty slot)
// The cell block makes the encoding injective on the scene space; text-only
// encodings leave it at zero.
class ConditioningEncoder {
public:
    explicit ConditioningEncoder(int grid) : grid_(grid) {}

    int grid() const { return grid_; }
    int dim() const { return kHistogram + kRelationBins + grid_ * grid_ * kCellSlots; }

    std::vector<float> encode(const SceneSpec& scene) const;

    // Falls back to histogram + relation blocks when only text is available.
    std::vector<float> encode_prompt(const PromptText& prompt) const;

    static constexpr int kHistogram = kShapeCount * kColorCount;  // 24
    static constexpr int kRelationBins = 64;
    static constexpr int kCellSlots = kShapeCount * kColorCount + 1;  // 25

private:
    int grid_;
};

}  // namespace scenealign
