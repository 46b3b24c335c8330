#include <doctest.h>

#include "scenealign/error.hpp"
#include "scenealign/eval.hpp"
#include "scenealign/rng.hpp"

using namespace scenealign;

namespace {

QAPair make_pair_(const std::string& q, const std::string& expected) {
    return QAPair{q, QuestionCategory::existence, expected, {}};
}

// Independent oracle: plain indicator sum divided by N.
double brute_force_acc(const std::vector<QAPair>& pairs, const AnswerSet& given) {
    double sum = 0.0;
    for (size_t i = 0; i < pairs.size(); ++i)
        sum += normalize_answer(pairs[i].expected_answer) == normalize_answer(given.answers[i])
                   ? 1.0
                   : 0.0;
    return sum / static_cast<double>(pairs.size());
}

}  // namespace

TEST_CASE("compute_acc: direct means") {
    std::vector<QAPair> pairs = {make_pair_("q1", "yes"), make_pair_("q2", "no"),
                                 make_pair_("q3", "red"), make_pair_("q4", "2")};
    CHECK(compute_acc(pairs, AnswerSet{{"yes", "no", "red", "2"}}).acc == 1.0);
    CHECK(compute_acc(pairs, AnswerSet{{"no", "yes", "blue", "3"}}).acc == 0.0);
    CHECK(compute_acc(pairs, AnswerSet{{"yes", "no", "red", "3"}}).acc == 0.75);
}

TEST_CASE("compute_acc: empty list and length mismatch are errors") {
    CHECK_THROWS_AS(compute_acc({}, AnswerSet{}), EmptyInputError);
    CHECK_THROWS_AS(compute_acc({make_pair_("q", "yes")}, AnswerSet{{"yes", "no"}}), RangeError);
}

TEST_CASE("compute_acc: normalization is case/space/period insensitive only") {
    std::vector<QAPair> pairs = {make_pair_("q", "Yes")};
    CHECK(compute_acc(pairs, AnswerSet{{" yes. "}}).acc == 1.0);
    CHECK(compute_acc(pairs, AnswerSet{{"yeah"}}).acc == 0.0);
}

TEST_CASE("compute_acc matches the brute-force indicator oracle") {
    const char* vocab[] = {"yes", "no", "0", "1", "2", "red", "blue", "none"};
    Rng rng(20250809);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 1 + rng.bounded_int(12);
        std::vector<QAPair> pairs;
        AnswerSet given;
        for (int i = 0; i < n; ++i) {
            pairs.push_back(make_pair_("q" + std::to_string(i), vocab[rng.bounded_int(8)]));
            given.answers.push_back(vocab[rng.bounded_int(8)]);
        }
        auto report = compute_acc(pairs, given);
        CHECK(report.acc == brute_force_acc(pairs, given));
        // report internals stay consistent
        int correct = 0;
        for (const auto& r : report.per_question) correct += r.correct ? 1 : 0;
        CHECK(report.acc == double(correct) / n);
    }
}

TEST_CASE("compute_acc: permutation equivariance") {
    Rng rng(99);
    std::vector<QAPair> pairs;
    AnswerSet given;
    for (int i = 0; i < 9; ++i) {
        pairs.push_back(make_pair_("q" + std::to_string(i), i % 2 ? "yes" : "no"));
        given.answers.push_back(rng.bounded_int(2) ? "yes" : "no");
    }
    double base = compute_acc(pairs, given).acc;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<size_t> perm(pairs.size());
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.bounded(i)]);
        std::vector<QAPair> p2;
        AnswerSet g2;
        for (size_t i : perm) {
            p2.push_back(pairs[i]);
            g2.answers.push_back(given.answers[i]);
        }
        CHECK(compute_acc(p2, g2).acc == base);
    }
}

TEST_CASE("compute_acc: flipping one correct answer drops acc by exactly 1/N") {
    std::vector<QAPair> pairs;
    AnswerSet given;
    const int n = 7;
    for (int i = 0; i < n; ++i) {
        pairs.push_back(make_pair_("q" + std::to_string(i), "yes"));
        given.answers.push_back("yes");
    }
    double full = compute_acc(pairs, given).acc;
    for (int i = 0; i < n; ++i) {
        AnswerSet broken = given;
        broken.answers[i] = "no";
        CHECK(compute_acc(pairs, broken).acc == doctest::Approx(full - 1.0 / n).epsilon(1e-12));
    }
}

TEST_CASE("per-category accuracy is consistent with per-question rows") {
    std::vector<QAPair> pairs = {
        {"a", QuestionCategory::existence, "yes", {}},
        {"b", QuestionCategory::existence, "yes", {}},
        {"c", QuestionCategory::count, "2", {}},
    };
    auto report = compute_acc(pairs, AnswerSet{{"yes", "no", "2"}});
    CHECK(report.per_category_acc.at("existence") == 0.5);
    CHECK(report.per_category_acc.at("count") == 1.0);
    CHECK(report.acc == doctest::Approx(2.0 / 3.0));
}
