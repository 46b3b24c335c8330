#include "scenealign/qa.hpp"

#include <algorithm>

#include "scenealign/error.hpp"

namespace scenealign {

namespace {

const char* kCategoryNames[5] = {"existence", "count", "attribute", "spatial", "quality"};

const char* kCountWords[7] = {"zero", "one", "two", "three", "four", "five", "six"};

int count_word_to_int(const std::string& w) {
    for (int i = 0; i < 7; ++i)
        if (w == kCountWords[i]) return i;
    return -1;
}

std::string np_for(ColorName color, Shape shape, bool plural) {
    return std::string(color_name(color)) + " " + (plural ? shape_plural(shape) : shape_name(shape));
}

// Splits "red circles" into (color, shape); accepts singular and plural.
std::optional<GroupRef> parse_noun_phrase(const std::string& np, bool* plural = nullptr) {
    auto space = np.find(' ');
    if (space == std::string::npos) return std::nullopt;
    auto color = color_from_name(np.substr(0, space));
    std::string shape_str = np.substr(space + 1);
    auto shape = shape_from_name(shape_str);
    if (!color || !shape) return std::nullopt;
    if (plural) *plural = !shape_str.empty() && shape_str.back() == 's';
    return GroupRef{*color, *shape};
}

struct RelSplit {
    std::string before;
    std::string after;
    RelationKind rel;
};

std::optional<RelSplit> split_on_relation(const std::string& text, const std::string& connector) {
    const RelationKind rels[4] = {RelationKind::left_of, RelationKind::right_of,
                                  RelationKind::above, RelationKind::below};
    for (RelationKind rel : rels) {
        std::string needle = " " + std::string(relation_phrase(rel)) + connector;
        auto pos = text.find(needle);
        if (pos != std::string::npos)
            return RelSplit{text.substr(0, pos), text.substr(pos + needle.size()), rel};
    }
    return std::nullopt;
}

}  // namespace

const char* question_category_name(QuestionCategory c) {
    return kCategoryNames[static_cast<int>(c)];
}

std::optional<QuestionCategory> question_category_from_name(const std::string& name) {
    for (int i = 0; i < 5; ++i)
        if (name == kCategoryNames[i]) return static_cast<QuestionCategory>(i);
    return std::nullopt;
}

bool in_closed_vocabulary(const std::string& token, QuestionCategory category) {
    switch (category) {
        case QuestionCategory::existence:
        case QuestionCategory::spatial:
        case QuestionCategory::quality:
            return token == "yes" || token == "no";
        case QuestionCategory::count:
            return token.size() == 1 && token[0] >= '0' && token[0] <= '6';
        case QuestionCategory::attribute:
            return color_from_name(token).has_value();
    }
    return false;
}

std::string existence_question(ColorName color, Shape shape) {
    return "Is there a " + np_for(color, shape, false) + "?";
}

std::string count_question(Shape shape) {
    return "How many " + shape_plural(shape) + " are there?";
}

std::string attribute_question(Shape shape) {
    return std::string("What color is the ") + shape_name(shape) + "?";
}

std::string quality_question(Shape shape) {
    return std::string("Is the ") + shape_name(shape) + " well-formed?";
}

std::string spatial_group_question(const ObjectGroup& subject, RelationKind rel,
                                   const ObjectGroup& object) {
    return "Is the " + group_noun_phrase(subject) + " " + relation_phrase(rel) + " the " +
           group_noun_phrase(object) + "?";
}

std::string spatial_within_question(ColorName color, Shape shape, RelationKind rel) {
    std::string np = np_for(color, shape, false);
    return "Is one " + np + " " + relation_phrase(rel) + " another " + np + "?";
}

// --- generation --------------------------------------------------------------

namespace {

std::vector<QAPair> generate_from_semantics(const std::vector<ObjectGroup>& groups,
                                            const std::vector<RelationClause>& clauses) {
    std::vector<QAPair> out;

    // existence: one per distinct (color, shape)
    for (const auto& g : groups) {
        QAPair qa;
        qa.question = existence_question(g.color, g.shape);
        qa.category = QuestionCategory::existence;
        qa.expected_answer = "yes";
        qa.target_ids = g.ids;
        out.push_back(std::move(qa));
    }

    // count: one per distinct shape, first-seen order
    std::vector<Shape> shapes_seen;
    for (const auto& g : groups)
        if (std::find(shapes_seen.begin(), shapes_seen.end(), g.shape) == shapes_seen.end())
            shapes_seen.push_back(g.shape);
    for (Shape s : shapes_seen) {
        QAPair qa;
        qa.question = count_question(s);
        qa.category = QuestionCategory::count;
        int n = 0;
        for (const auto& g : groups)
            if (g.shape == s) {
                n += static_cast<int>(g.ids.size());
                qa.target_ids.insert(qa.target_ids.end(), g.ids.begin(), g.ids.end());
            }
        qa.expected_answer = std::to_string(n);
        out.push_back(std::move(qa));
    }

    // attribute: one per object whose shape is unique in the scene
    for (Shape s : shapes_seen) {
        int n = 0;
        const ObjectGroup* owner = nullptr;
        for (const auto& g : groups)
            if (g.shape == s) {
                n += static_cast<int>(g.ids.size());
                owner = &g;
            }
        if (n == 1 && owner) {
            QAPair qa;
            qa.question = attribute_question(s);
            qa.category = QuestionCategory::attribute;
            qa.expected_answer = color_name(owner->color);
            qa.target_ids = owner->ids;
            out.push_back(std::move(qa));
        }
    }

    // spatial: one per verbalized relation
    for (const auto& clause : clauses) {
        const auto& subj = groups[clause.subject_group];
        QAPair qa;
        qa.category = QuestionCategory::spatial;
        qa.expected_answer = "yes";
        if (clause.within) {
            qa.question = spatial_within_question(subj.color, subj.shape, clause.rel);
            qa.target_ids = subj.ids;
        } else {
            const auto& obj = groups[clause.object_group];
            qa.question = spatial_group_question(subj, clause.rel, obj);
            qa.target_ids = subj.ids;
            qa.target_ids.insert(qa.target_ids.end(), obj.ids.begin(), obj.ids.end());
        }
        out.push_back(std::move(qa));
    }

    // quality: one per object, group order
    for (const auto& g : groups) {
        for (int id : g.ids) {
            QAPair qa;
            qa.question = quality_question(g.shape);
            qa.category = QuestionCategory::quality;
            qa.expected_answer = "yes";
            qa.target_ids = {id};
            out.push_back(std::move(qa));
        }
    }
    return out;
}

}  // namespace

std::vector<QAPair> generate_qa(const SceneSpec& scene) {
    validate_scene(scene);
    if (scene.objects.empty()) return {};
    return generate_from_semantics(derive_groups(scene), derive_clauses(scene));
}

// --- question parsing ---------------------------------------------------------

ParsedQuestion parse_question(const std::string& question) {
    ParsedQuestion q;
    if (question.empty() || question.back() != '?') return q;
    std::string body = question.substr(0, question.size() - 1);

    auto starts = [&](const char* prefix) { return body.rfind(prefix, 0) == 0; };

    if (starts("Is there a ")) {
        auto np = parse_noun_phrase(body.substr(11));
        if (!np) return q;
        q.kind = ParsedQuestion::Kind::existence;
        q.subject = *np;
        q.subject_has_color = true;
        return q;
    }
    if (starts("How many ")) {
        const std::string tail = " are there";
        if (body.size() <= 9 + tail.size() || body.substr(body.size() - tail.size()) != tail)
            return q;
        auto shape = shape_from_name(body.substr(9, body.size() - 9 - tail.size()));
        if (!shape) return q;
        q.kind = ParsedQuestion::Kind::count;
        q.subject.shape = *shape;
        return q;
    }
    if (starts("What color is the ")) {
        auto shape = shape_from_name(body.substr(18));
        if (!shape) return q;
        q.kind = ParsedQuestion::Kind::attribute;
        q.subject.shape = *shape;
        return q;
    }
    if (starts("Is the ")) {
        std::string rest = body.substr(7);
        const std::string wf = " well-formed";
        if (rest.size() > wf.size() && rest.substr(rest.size() - wf.size()) == wf) {
            auto shape = shape_from_name(rest.substr(0, rest.size() - wf.size()));
            if (!shape) return q;
            q.kind = ParsedQuestion::Kind::quality;
            q.subject.shape = *shape;
            return q;
        }
        auto split = split_on_relation(rest, " the ");
        if (!split) return q;
        auto subj = parse_noun_phrase(split->before);
        auto obj = parse_noun_phrase(split->after);
        if (!subj || !obj) return q;
        q.kind = ParsedQuestion::Kind::spatial_group;
        q.subject = *subj;
        q.subject_has_color = true;
        q.object = *obj;
        q.rel = split->rel;
        return q;
    }
    if (starts("Is one ")) {
        auto split = split_on_relation(body.substr(7), " another ");
        if (!split) return q;
        auto subj = parse_noun_phrase(split->before);
        auto obj = parse_noun_phrase(split->after);
        if (!subj || !obj || subj->color != obj->color || subj->shape != obj->shape) return q;
        q.kind = ParsedQuestion::Kind::spatial_within;
        q.subject = *subj;
        q.subject_has_color = true;
        q.rel = split->rel;
        return q;
    }
    return q;
}

// --- prompt parsing -----------------------------------------------------------

std::optional<PromptSemantics> parse_prompt(const std::string& text) {
    PromptSemantics sem;
    if (text == "an empty scene") {
        sem.empty_scene = true;
        return sem;
    }

    std::vector<std::string> parts;
    size_t pos = 0;
    while (true) {
        auto next = text.find("; ", pos);
        parts.push_back(text.substr(pos, next == std::string::npos ? next : next - pos));
        if (next == std::string::npos) break;
        pos = next + 2;
    }
    if (parts.empty()) return std::nullopt;

    // head: "a red circle" or "two red circles and one blue square"
    std::string head = parts[0];
    std::vector<std::string> phrases;
    pos = 0;
    while (true) {
        auto next = head.find(" and ", pos);
        phrases.push_back(head.substr(pos, next == std::string::npos ? next : next - pos));
        if (next == std::string::npos) break;
        pos = next + 5;
    }
    int next_id = 1;
    for (const auto& phrase : phrases) {
        auto space = phrase.find(' ');
        if (space == std::string::npos) return std::nullopt;
        std::string det = phrase.substr(0, space);
        int n = det == "a" ? 1 : count_word_to_int(det);
        if (n < 1) return std::nullopt;
        auto np = parse_noun_phrase(phrase.substr(space + 1));
        if (!np) return std::nullopt;
        ObjectGroup g;
        g.color = np->color;
        g.shape = np->shape;
        for (int i = 0; i < n; ++i) g.ids.push_back(next_id++);
        sem.groups.push_back(std::move(g));
        sem.group_counts.push_back(n);
    }

    auto find_group = [&](const GroupRef& ref) -> int {
        for (size_t i = 0; i < sem.groups.size(); ++i)
            if (sem.groups[i].color == ref.color && sem.groups[i].shape == ref.shape)
                return static_cast<int>(i);
        return -1;
    };

    for (size_t i = 1; i < parts.size(); ++i) {
        const std::string& clause = parts[i];
        RelationClause rc;
        if (clause.rfind("one ", 0) == 0) {
            auto is_pos = clause.find(" is ");
            if (is_pos == std::string::npos) return std::nullopt;
            auto subj = parse_noun_phrase(clause.substr(4, is_pos - 4));
            auto split = split_on_relation(clause.substr(is_pos + 3), " another ");
            if (!subj || !split) return std::nullopt;
            rc.within = true;
            rc.rel = split->rel;
            rc.subject_group = rc.object_group = find_group(*subj);
        } else if (clause.rfind("the ", 0) == 0) {
            auto verb = clause.find(" is ");
            size_t verb_len = 4;
            if (verb == std::string::npos) {
                verb = clause.find(" are ");
                verb_len = 5;
            }
            if (verb == std::string::npos) return std::nullopt;
            auto subj = parse_noun_phrase(clause.substr(4, verb - 4));
            std::string rest = clause.substr(verb + verb_len);
            // rest: "to the left of the red circles"
            const RelationKind rels[4] = {RelationKind::left_of, RelationKind::right_of,
                                          RelationKind::above, RelationKind::below};
            bool matched = false;
            for (RelationKind rel : rels) {
                std::string prefix = std::string(relation_phrase(rel)) + " the ";
                if (rest.rfind(prefix, 0) == 0) {
                    auto obj = parse_noun_phrase(rest.substr(prefix.size()));
                    if (!subj || !obj) return std::nullopt;
                    rc.rel = rel;
                    rc.subject_group = find_group(*subj);
                    rc.object_group = find_group(*obj);
                    matched = true;
                    break;
                }
            }
            if (!matched) return std::nullopt;
        } else {
            return std::nullopt;
        }
        if (rc.subject_group < 0 || rc.object_group < 0) return std::nullopt;
        sem.clauses.push_back(rc);
    }
    return sem;
}

std::vector<QAPair> generate_qa_from_prompt(const std::string& text) {
    auto sem = parse_prompt(text);
    if (!sem) throw ProtocolError("unparseable prompt", text);
    if (sem->empty_scene) return {};
    return generate_from_semantics(sem->groups, sem->clauses);
}

}  // namespace scenealign
