#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace v2t {

// Slot-filler grammar for one topic. Templates are space-separated token
// patterns; {subj} {verb} {obj} {mod} {mod2} draw from the lists below and
// {opt} expands to a filler word or to nothing.
struct TopicGrammar {
    std::string name;
    std::vector<std::string> subjects;
    std::vector<std::string> verbs;
    std::vector<std::string> objects;
    std::vector<std::string> modifiers;
    std::vector<std::string> templates;
};

struct GrammarConfig {
    std::vector<TopicGrammar> topics;
    // Interchangeable phrases; substituting within a class preserves meaning.
    std::vector<std::vector<std::string>> synonym_classes;
    // Optional function words; insertable/deletable without changing meaning.
    std::vector<std::string> fillers;
    // Shared time phrases filling {when} slots.
    std::vector<std::string> time_phrases;
    double filler_slot_rate = 0.35;

    void validate() const;
    static GrammarConfig default_grammar();
};

struct LabeledText {
    std::string text;
    std::string topic;
};

// Seeded template expansion; identical seeds give byte-identical output.
std::vector<LabeledText> generate_synthetic_corpus(std::uint64_t seed, std::size_t n,
                                                   const GrammarConfig& grammar);

}  // namespace v2t
