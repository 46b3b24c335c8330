#include <doctest.h>

#include <set>
#include <tuple>

#include "scenealign/error.hpp"
#include "scenealign/oracle.hpp"
#include "scenealign/scene.hpp"

using namespace scenealign;

TEST_CASE("sample_scene: empty, deterministic, capacity") {
    SceneSpec empty = sample_scene(7, 0);
    CHECK(empty.objects.empty());
    CHECK(empty.seed == 7);

    SceneSpec a = sample_scene(7, 3);
    SceneSpec b = sample_scene(7, 3);
    CHECK(a == b);

    CHECK_THROWS_AS(sample_scene(123, 17), CapacityError);
    CHECK_THROWS_AS(sample_scene(1, 3, DomainConfig{32, 1}), CapacityError);
}

TEST_CASE("sample_scene: invariants over many seeds") {
    for (uint64_t seed = 0; seed < 200; ++seed) {
        SceneSpec s = sample_scene(seed, static_cast<int>(seed % 7));
        validate_scene(s);
        std::set<std::pair<int, int>> cells;
        for (const auto& o : s.objects) {
            CHECK(cells.insert({o.cell.row, o.cell.col}).second);
            CHECK(o.distortion == 0.0);
        }
    }
}

TEST_CASE("render: empty scene is uniform background") {
    Image img = render(sample_scene(3, 0));
    for (int i = 0; i < img.width * img.height; ++i) {
        CHECK(img.pixels[3 * i] == kBackground.r);
        CHECK(img.pixels[3 * i + 1] == kBackground.g);
        CHECK(img.pixels[3 * i + 2] == kBackground.b);
    }
}

TEST_CASE("render: red circle covers its cell center") {
    SceneSpec s;
    s.objects.push_back({1, Shape::circle, ColorName::red, {1, 1}, 0.7, 0.0});
    Image img = render(s);
    int cell = s.cell_size();
    const uint8_t* p = img.at(cell + cell / 2, cell + cell / 2);
    CHECK(p[0] == 255);
    CHECK(p[1] == 0);
    CHECK(p[2] == 0);
}

TEST_CASE("render: deterministic bit-identical") {
    SceneSpec s = sample_scene(99, 4);
    s.objects[0].distortion = 0.5;
    CHECK(render(s) == render(s));
}

TEST_CASE("describe: template examples") {
    SceneSpec one;
    one.objects.push_back({1, Shape::circle, ColorName::red, {0, 0}, 0.7, 0.0});
    CHECK(describe(one).text == "a red circle");

    // two red circles and one blue square, the square left of both
    SceneSpec multi;
    multi.objects.push_back({1, Shape::circle, ColorName::red, {0, 2}, 0.7, 0.0});
    multi.objects.push_back({2, Shape::circle, ColorName::red, {1, 3}, 0.7, 0.0});
    multi.objects.push_back({3, Shape::square, ColorName::blue, {0, 0}, 0.7, 0.0});
    CHECK(describe(multi).text ==
          "two red circles and one blue square; the blue square is to the left of the red circles");

    CHECK(describe(sample_scene(1, 0)).text == "an empty scene");
}

TEST_CASE("describe: deterministic and total") {
    for (uint64_t seed = 0; seed < 150; ++seed) {
        SceneSpec s = sample_scene(seed, 1 + static_cast<int>(seed % 6));
        PromptText p1 = describe(s);
        PromptText p2 = describe(s);
        CHECK(p1.text == p2.text);
        CHECK(!p1.text.empty());
        if (s.objects.size() >= 2) {
            // at least one relation clause is verbalized
            CHECK(p1.text.find("; ") != std::string::npos);
        }
    }
}

TEST_CASE("perturb: excess adds one object with record") {
    SceneSpec s;
    s.objects.push_back({1, Shape::circle, ColorName::red, {1, 1}, 0.7, 0.0});
    PerturbResult r = perturb(s, MisalignCategory::number_excess, 5);
    CHECK(r.scene.objects.size() == 2);
    CHECK(r.record.category == MisalignCategory::number_excess);
    CHECK(r.record.delta == +1);
    CHECK(r.record.shape == Shape::circle);
}

TEST_CASE("perturb: attribute recolors a shape-unique object") {
    SceneSpec s;
    s.objects.push_back({1, Shape::circle, ColorName::red, {1, 1}, 0.7, 0.0});
    PerturbResult r = perturb(s, MisalignCategory::attribute, 5);
    CHECK(r.scene.objects[0].color != ColorName::red);
    CHECK(r.record.expected_token == "red");
    CHECK(r.record.observed_token == color_name(r.scene.objects[0].color));
}

TEST_CASE("perturb: deficit on empty scene is inapplicable") {
    CHECK_THROWS_AS(perturb(sample_scene(1, 0), MisalignCategory::number_deficit, 3),
                    ApplicabilityError);
}

TEST_CASE("round-trip: oracle_parse recovers distortion-0 scenes") {
    int checked = 0;
    for (uint64_t seed = 1000; seed < 1100; ++seed) {
        SceneSpec s = sample_scene(seed, 1 + static_cast<int>(seed % 6));
        ParsedScene parsed = oracle_parse(render(s), s.grid);
        REQUIRE(parsed.objects.size() == s.objects.size());
        CHECK(parsed.unknown_regions.empty());
        // match multiset of (shape, color, cell)
        std::multiset<std::tuple<int, int, int, int>> want, got;
        for (const auto& o : s.objects)
            want.insert({int(o.shape), int(o.color), o.cell.row, o.cell.col});
        for (const auto& o : parsed.objects)
            got.insert({int(o.shape), int(o.color), o.cell.row, o.cell.col});
        CHECK(want == got);
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("round-trip holds on the 32px/2-grid training domain") {
    DomainConfig cfg{32, 2};
    for (uint64_t seed = 0; seed < 100; ++seed) {
        SceneSpec s = sample_scene(seed, 1 + static_cast<int>(seed % 4), cfg);
        ParsedScene parsed = oracle_parse(render(s), s.grid);
        REQUIRE(parsed.objects.size() == s.objects.size());
        std::multiset<std::tuple<int, int, int, int>> want, got;
        for (const auto& o : s.objects)
            want.insert({int(o.shape), int(o.color), o.cell.row, o.cell.col});
        for (const auto& o : parsed.objects)
            got.insert({int(o.shape), int(o.color), o.cell.row, o.cell.col});
        CHECK(want == got);
    }
}
