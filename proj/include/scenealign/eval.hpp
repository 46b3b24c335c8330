#pragma once

#include <map>
#include <string>
#include <vector>

#include "scenealign/image.hpp"
#include "scenealign/oracle.hpp"
#include "scenealign/qa.hpp"

namespace scenealign {

// Answers aligned index-for-index with the question list they respond to.
struct AnswerSet {
    std::vector<std::string> answers;
};

struct QuestionResult {
    QAPair qa;
    std::string given;
    bool correct = false;
};

struct EvalReport {
    std::vector<QuestionResult> per_question;
    double acc = 0.0;
    std::map<std::string, double> per_category_acc;
};

// Lowercase + trim + strip a trailing period; the match itself stays exact.
std::string normalize_answer(const std::string& raw);

// Eq.-style accuracy: normalized mean of exact token matches.
EvalReport compute_acc(const std::vector<QAPair>& pairs, const AnswerSet& given);

class VqaBackend {
public:
    virtual ~VqaBackend() = default;
    virtual AnswerSet answer(const Image& image, const std::vector<QAPair>& questions) = 0;
};

class OracleVqa final : public VqaBackend {
public:
    explicit OracleVqa(int grid = 0) : grid_(grid) {}
    AnswerSet answer(const Image& image, const std::vector<QAPair>& questions) override {
        int grid = grid_ > 0 ? grid_ : image.width / 16;
        return AnswerSet{oracle_answers(image, questions, grid)};
    }

private:
    int grid_;
};

}  // namespace scenealign
