#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace v2t {

// Sentence-level BLEU in [0,100]: modified n-gram precisions up to 4-grams
// with add-one smoothing on numerator and denominator for n >= 2, geometric
// mean, brevity penalty. Empty hypothesis scores 0.
double sentence_bleu(std::string_view hypothesis, std::string_view reference);

struct BleuHistogram {
    std::vector<std::size_t> bins;  // equal-width over [0,100], last bin right-closed
    std::size_t exact_100 = 0;
    std::size_t total = 0;
};

BleuHistogram bleu_histogram(const std::vector<double>& scores, std::size_t n_bins);

}  // namespace v2t
