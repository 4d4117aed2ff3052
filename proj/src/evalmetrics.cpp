#include "barecam/evalmetrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "barecam/errors.hpp"
#include "barecam/textio.hpp"

namespace barecam::eval {

double roc_auc(const ScoredSet& s) {
    if (s.scores.size() != s.labels.size())
        throw ShapeError("roc_auc: scores and labels differ in length");
    const size_t n = s.scores.size();
    size_t pos = 0;
    for (int l : s.labels) {
        if (l != 0 && l != 1) throw DomainError("roc_auc: labels must be 0 or 1");
        pos += static_cast<size_t>(l);
    }
    const size_t neg = n - pos;
    if (pos == 0 || neg == 0)
        throw DomainError("roc_auc: need at least one positive and one negative");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&s](size_t a, size_t b) { return s.scores[a] < s.scores[b]; });

    // Midranks over tied groups; U = sum of positive ranks - P(P+1)/2.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && s.scores[order[j]] == s.scores[order[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k)
            if (s.labels[order[k]] == 1) rank_sum_pos += midrank;
        i = j;
    }
    const double p = static_cast<double>(pos);
    const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(neg));
}

double accuracy(const ScoredSet& s, double threshold) {
    if (s.scores.empty()) throw DomainError("accuracy: empty input");
    if (s.scores.size() != s.labels.size())
        throw ShapeError("accuracy: scores and labels differ in length");
    size_t hits = 0;
    for (size_t i = 0; i < s.scores.size(); ++i) {
        const int pred = s.scores[i] >= threshold ? 1 : 0;
        if (pred == s.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(s.scores.size());
}

double accuracy_argmax(const std::vector<std::array<double, 2>>& scores,
                       const std::vector<int>& labels) {
    if (scores.empty()) throw DomainError("accuracy: empty input");
    if (scores.size() != labels.size())
        throw ShapeError("accuracy: scores and labels differ in length");
    size_t hits = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        const int pred = scores[i][1] > scores[i][0] ? 1 : 0;
        if (pred == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

ExperimentReport aggregate_report(const std::map<int, double>& per_class,
                                  std::map<std::string, std::string> tags) {
    if (per_class.empty()) throw DomainError("aggregate_report: empty map");
    ExperimentReport rep;
    rep.per_class_auc = per_class;
    rep.tags = std::move(tags);
    double sum = 0.0;
    for (const auto& [cls, auc] : per_class) sum += auc;
    rep.mean_auc = sum / static_cast<double>(per_class.size());
    return rep;
}

std::string ExperimentReport::to_text() const {
    std::ostringstream os;
    std::string tagstr;
    for (const auto& [k, v] : tags) tagstr += "\t" + k + "=" + v;
    for (const auto& [cls, auc] : per_class_auc)
        os << "class=" << cls << "\tauc=" << format_double(auc) << tagstr << '\n';
    os << "mean_auc=" << format_double(mean_auc);
    if (has_accuracy) os << "\taccuracy=" << format_double(accuracy);
    os << tagstr << '\n';
    return os.str();
}

}  // namespace barecam::eval
