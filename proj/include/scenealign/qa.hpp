#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scenealign/scene.hpp"

namespace scenealign {

enum class QuestionCategory : uint8_t { existence = 0, count, attribute, spatial, quality };
const char* question_category_name(QuestionCategory c);
std::optional<QuestionCategory> question_category_from_name(const std::string& name);

struct QAPair {
    std::string question;
    QuestionCategory category = QuestionCategory::existence;
    std::string expected_answer;   // token from the closed vocabulary
    std::vector<int> target_ids;   // scene object ids the question is about
    bool free_text = false;        // remote answer outside the closed vocabulary

    bool operator==(const QAPair&) const = default;
};

// Closed-vocabulary check for an (answer, category) pair.
bool in_closed_vocabulary(const std::string& token, QuestionCategory category);

// Template QA generation: existence, count, attribute, spatial, quality, in
// that order. Deterministic function of the scene.
std::vector<QAPair> generate_qa(const SceneSpec& scene);

// Behavioral interface for question generation backends.
class QaGenerator {
public:
    virtual ~QaGenerator() = default;
    virtual std::vector<QAPair> generate(const SceneSpec& scene, const PromptText& prompt) = 0;
};

class OracleQaGenerator final : public QaGenerator {
public:
    std::vector<QAPair> generate(const SceneSpec& scene, const PromptText&) override {
        return generate_qa(scene);
    }
};

// --- structured view of a closed-grammar question ---------------------------

struct GroupRef {
    ColorName color = ColorName::red;
    Shape shape = Shape::circle;
};

struct ParsedQuestion {
    enum class Kind { existence, count, attribute, spatial_group, spatial_within, quality, unknown };
    Kind kind = Kind::unknown;
    GroupRef subject;                    // existence/attribute/quality use subject.shape (+color)
    GroupRef object;
    bool subject_has_color = false;
    RelationKind rel = RelationKind::left_of;
};

// Deterministic parser for the question templates emitted by generate_qa.
// Anything outside the closed grammar comes back as Kind::unknown.
ParsedQuestion parse_question(const std::string& question);

// Question text builders shared by generate_qa and the prompt grammar.
std::string existence_question(ColorName color, Shape shape);
std::string count_question(Shape shape);
std::string attribute_question(Shape shape);
std::string quality_question(Shape shape);
std::string spatial_group_question(const ObjectGroup& subject, RelationKind rel,
                                   const ObjectGroup& object);
std::string spatial_within_question(ColorName color, Shape shape, RelationKind rel);

// Reconstructs scene semantics (groups and relation clauses, no cells) from a
// prompt produced by describe(). Used by text-only question generation.
struct PromptSemantics {
    bool empty_scene = false;
    std::vector<ObjectGroup> groups;        // cells left empty
    std::vector<RelationClause> clauses;
    std::vector<int> group_counts;
};
std::optional<PromptSemantics> parse_prompt(const std::string& text);

// QA generation from prompt text alone (the stub-server path).
std::vector<QAPair> generate_qa_from_prompt(const std::string& text);

}  // namespace scenealign
