#include "scenealign/eval.hpp"

#include <algorithm>
#include <cctype>

#include "scenealign/error.hpp"

namespace scenealign {

std::string normalize_answer(const std::string& raw) {
    std::string s = raw;
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    auto begin = s.find_first_not_of(" \t\r\n");
    auto end = s.find_last_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    s = s.substr(begin, end - begin + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

EvalReport compute_acc(const std::vector<QAPair>& pairs, const AnswerSet& given) {
    if (pairs.empty())
        throw EmptyInputError("compute_acc: accuracy undefined for an empty question list");
    if (pairs.size() != given.answers.size())
        throw RangeError("compute_acc: answer count does not match question count");

    EvalReport report;
    report.per_question.reserve(pairs.size());
    std::map<std::string, std::pair<int, int>> cat;  // category -> (correct, total)
    int n_correct = 0;
    for (size_t i = 0; i < pairs.size(); ++i) {
        QuestionResult r;
        r.qa = pairs[i];
        r.given = given.answers[i];
        r.correct = normalize_answer(pairs[i].expected_answer) == normalize_answer(r.given);
        n_correct += r.correct ? 1 : 0;
        auto& c = cat[question_category_name(pairs[i].category)];
        c.second += 1;
        c.first += r.correct ? 1 : 0;
        report.per_question.push_back(std::move(r));
    }
    report.acc = static_cast<double>(n_correct) / static_cast<double>(pairs.size());
    for (const auto& [name, counts] : cat)
        report.per_category_acc[name] =
            static_cast<double>(counts.first) / static_cast<double>(counts.second);
    return report;
}

}  // namespace scenealign
