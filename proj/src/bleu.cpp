#include "v2t/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "v2t/corpus.hpp"
#include "v2t/errors.hpp"

namespace v2t {

namespace {

constexpr int kMaxOrder = 4;

std::map<std::string, int> ngram_counts(const std::vector<std::string>& words, int n) {
    std::map<std::string, int> counts;
    if (static_cast<int>(words.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
        std::string key;
        for (int j = 0; j < n; ++j) {
            if (j) key += '\x1f';
            key += words[i + j];
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

double sentence_bleu(std::string_view hypothesis, std::string_view reference) {
    auto hyp = whitespace_tokens(hypothesis);
    auto ref = whitespace_tokens(reference);
    if (hyp.empty()) return 0.0;

    double log_precision_sum = 0.0;
    for (int n = 1; n <= kMaxOrder; ++n) {
        auto hyp_counts = ngram_counts(hyp, n);
        auto ref_counts = ngram_counts(ref, n);
        long matches = 0;
        long total = 0;
        for (const auto& [key, count] : hyp_counts) {
            total += count;
            auto it = ref_counts.find(key);
            if (it != ref_counts.end()) matches += std::min(count, it->second);
        }
        double num = static_cast<double>(matches);
        double den = static_cast<double>(total);
        if (n >= 2) {
            num += 1.0;
            den += 1.0;
        }
        if (num == 0.0) return 0.0;  // only possible for unigrams
        log_precision_sum += std::log(num / den);
    }

    double bp = 1.0;
    if (hyp.size() <= ref.size()) {
        bp = std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size()));
    }
    return 100.0 * bp * std::exp(log_precision_sum / kMaxOrder);
}

BleuHistogram bleu_histogram(const std::vector<double>& scores, std::size_t n_bins) {
    if (n_bins < 2) throw ConfigError("bleu_histogram needs at least 2 bins");
    BleuHistogram h;
    h.bins.assign(n_bins, 0);
    h.total = scores.size();
    const double width = 100.0 / static_cast<double>(n_bins);
    for (double s : scores) {
        auto bin = static_cast<std::size_t>(s / width);
        if (bin >= n_bins) bin = n_bins - 1;
        ++h.bins[bin];
        if (s == 100.0) ++h.exact_100;
    }
    return h;
}

}  // namespace v2t
