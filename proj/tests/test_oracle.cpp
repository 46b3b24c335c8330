#include <doctest.h>

#include "scenealign/error.hpp"
#include "scenealign/eval.hpp"
#include "scenealign/oracle.hpp"
#include "scenealign/qa.hpp"
#include "scenealign/scene.hpp"

using namespace scenealign;

TEST_CASE("oracle_parse: uniform background has zero objects") {
    Image img(64, 64, kBackground.r, kBackground.g, kBackground.b);
    ParsedScene p = oracle_parse(img, 4);
    CHECK(p.objects.empty());
    CHECK(p.unknown_regions.empty());
}

TEST_CASE("oracle_parse: rejects unsupported dimensions") {
    Image img(60, 64);
    CHECK_THROWS_AS(oracle_parse(img, 4), DimensionError);
    CHECK_THROWS_AS(oracle_parse(Image(63, 63)), DimensionError);
}

TEST_CASE("oracle_parse: distortion scores separate 0 from 0.8") {
    // sweep shapes, colors and scales at both ends of the distortion range
    double max_clean = 0.0, min_warped = 1e9;
    for (int shape = 0; shape < kShapeCount; ++shape) {
        for (int scale_i = 0; scale_i <= 4; ++scale_i) {
            for (int cell = 0; cell < 2; ++cell) {
                SceneSpec s;
                s.canvas = 64;
                s.grid = 4;
                SceneObject o;
                o.id = 1;
                o.shape = static_cast<Shape>(shape);
                o.color = ColorName::blue;
                o.cell = {cell, 1 + cell};
                o.scale = 0.5 + 0.1 * scale_i;
                o.distortion = 0.0;
                s.objects = {o};

                ParsedScene clean = oracle_parse(render(s), 4);
                REQUIRE(clean.objects.size() == 1);
                CHECK(clean.objects[0].shape == o.shape);
                max_clean = std::max(max_clean, clean.objects[0].distortion_score);

                s.objects[0].distortion = 0.8;
                ParsedScene warped = oracle_parse(render(s), 4);
                REQUIRE(warped.objects.size() == 1);
                min_warped = std::min(min_warped, warped.objects[0].distortion_score);
            }
        }
    }
    CHECK(max_clean < kDistortionThreshold);
    CHECK(min_warped >= kDistortionThreshold);
}

TEST_CASE("oracle_answers: counts, absent shapes, quality") {
    SceneSpec s;
    s.objects.push_back({1, Shape::circle, ColorName::green, {0, 0}, 0.7, 0.0});
    s.objects.push_back({2, Shape::circle, ColorName::green, {2, 2}, 0.7, 0.0});
    Image img = render(s);

    QAPair count{count_question(Shape::circle), QuestionCategory::count, "2", {1, 2}};
    QAPair absent{existence_question(ColorName::red, Shape::triangle),
                  QuestionCategory::existence, "no", {}};
    QAPair absent_count{count_question(Shape::square), QuestionCategory::count, "0", {}};
    QAPair absent_color{attribute_question(Shape::square), QuestionCategory::attribute, "red", {}};
    auto ans = oracle_answers(img, {count, absent, absent_count, absent_color}, 4);
    CHECK(ans[0] == "2");
    CHECK(ans[1] == "no");
    CHECK(ans[2] == "0");
    CHECK(ans[3] == "none");  // no square to name a color for
}

TEST_CASE("oracle_answers: existence on background-only image is no") {
    Image img(64, 64, kBackground.r, kBackground.g, kBackground.b);
    QAPair q{existence_question(ColorName::red, Shape::circle), QuestionCategory::existence,
             "yes", {}};
    auto ans = oracle_answers(img, {q}, 4);
    CHECK(ans[0] == "no");
}

TEST_CASE("oracle_answers: quality flips to no at distortion 0.8") {
    SceneSpec s;
    s.objects.push_back({1, Shape::circle, ColorName::red, {1, 1}, 0.8, 0.8});
    QAPair q{quality_question(Shape::circle), QuestionCategory::quality, "yes", {1}};
    auto ans = oracle_answers(render(s), {q}, 4);
    CHECK(ans[0] == "no");
}

TEST_CASE("perturb soundness: original QA fails against the perturbed render") {
    const MisalignCategory cats[5] = {MisalignCategory::number_excess,
                                      MisalignCategory::number_deficit,
                                      MisalignCategory::attribute, MisalignCategory::spatial,
                                      MisalignCategory::aesthetic};
    int tested = 0;
    for (uint64_t seed = 40; seed < 160; ++seed) {
        SceneSpec s = sample_scene(seed, 2 + static_cast<int>(seed % 4));
        auto qa = generate_qa(s);
        MisalignCategory cat = cats[seed % 5];
        try {
            PerturbResult r = perturb(s, cat, seed * 31 + 1);
            auto report = compute_acc(qa, AnswerSet{oracle_answers(render(r.scene), qa, s.grid)});
            CHECK(report.acc < 1.0);
            ++tested;
        } catch (const ApplicabilityError&) {
            // some category/scene combinations are legitimately inapplicable
        }
    }
    CHECK(tested > 80);
}
