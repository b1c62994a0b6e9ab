#include "v2t/grammar.hpp"

#include <string_view>

#include "v2t/corpus.hpp"
#include "v2t/errors.hpp"
#include "v2t/rng.hpp"

namespace v2t {

void GrammarConfig::validate() const {
    if (topics.size() < 4) {
        throw ConfigError("grammar needs at least 4 topics, got " + std::to_string(topics.size()));
    }
    for (const auto& t : topics) {
        if (t.subjects.empty() || t.verbs.empty() || t.objects.empty() || t.modifiers.empty() ||
            t.templates.empty()) {
            throw ConfigError("topic '" + t.name + "' is missing slot fillers or templates");
        }
    }
    for (const auto& cls : synonym_classes) {
        if (cls.size() < 2) throw ConfigError("synonym classes need at least 2 members");
    }
}

GrammarConfig GrammarConfig::default_grammar() {
    GrammarConfig g;

    g.topics.push_back({
        "weather",
        {"the sky", "the wind", "the morning", "the forecast", "the storm", "the weather",
         "the evening", "the air"},
        {"looks", "feels", "seems", "stays", "turned", "gets", "remains", "became"},
        {"coast", "valley", "hills", "garden", "harbor", "fields", "lake", "plains"},
        {"cold", "cloudy", "sunny", "windy", "gray", "mild", "wet", "chilly", "freezing", "calm",
         "overcast", "breezy"},
        {"{subj} {verb} {mod} {when} .",
         "{subj} {verb} {mod} and {mod2} {when} .",
         "{subj} over the {obj} {verb} {mod} .",
         "i think {subj} {verb} {opt} {mod} {when} .",
         "does {subj} ever get {mod} near the {obj} ?",
         "{subj} {verb} {mod} near the {obj} {when} ."},
    });

    g.topics.push_back({
        "football",
        {"the striker", "the keeper", "the team", "the coach", "the fans", "the captain",
         "the defender", "the club"},
        {"won", "scored", "missed", "played", "defended", "celebrated", "lost", "dominated"},
        {"match", "final", "league", "title", "derby", "game", "penalty", "cup"},
        {"great", "tough", "late", "lucky", "brilliant", "narrow", "decisive", "famous", "legendary"},
        {"{subj} {verb} the {obj} {when} .",
         "{subj} {opt} {verb} the {obj} again .",
         "what a {mod} goal from {subj} !",
         "{subj} {verb} a {mod} {obj} {when} .",
         "did {subj} really deserve the {mod} {obj} ?",
         "{subj} {verb} the {mod} {obj} ."},
    });

    g.topics.push_back({
        "music",
        {"the band", "the singer", "the pianist", "the choir", "the drummer", "the guitarist",
         "the violinist", "the composer"},
        {"played", "recorded", "sang", "wrote", "performed", "practiced", "covered", "arranged",
         "composed"},
        {"song", "melody", "album", "concert", "tune", "anthem", "track", "ballad"},
        {"loud", "gentle", "catchy", "slow", "wonderful", "lively", "lovely", "soft", "noisy"},
        {"{subj} {verb} a {mod} {obj} {when} .",
         "{subj} {verb} the {obj} on the radio {when} .",
         "i love how {subj} {verb} the {obj} .",
         "{subj} {opt} {verb} a {mod} and {mod2} {obj} .",
         "could {subj} play the {obj} for us ?",
         "{subj} {verb} the {mod} {obj} {when} ."},
    });

    g.topics.push_back({
        "movies",
        {"the actor", "the director", "the critic", "the audience", "the actress", "the crew",
         "the writer", "the studio"},
        {"watched", "filmed", "praised", "reviewed", "saw", "viewed", "enjoyed", "edited",
         "applauded"},
        {"movie", "film", "comedy", "trailer", "scene", "sequel", "thriller", "premiere", "teaser"},
        {"funny", "boring", "scary", "amazing", "fantastic", "strange", "dark", "touching",
         "hilarious", "frightening"},
        {"{subj} {verb} the {mod} {obj} {when} .",
         "{subj} {opt} {verb} the {obj} twice .",
         "the {obj} felt {mod} and {mod2} .",
         "{subj} {verb} a {mod} {obj} {when} .",
         "have you {verb} the new {obj} yet ?",
         "{subj} {verb} the {obj} {when} ."},
    });

    g.topics.push_back({
        "food",
        {"the chef", "the waiter", "the baker", "my mother", "the cook", "grandma",
         "the host", "my uncle"},
        {"cooked", "baked", "tasted", "served", "prepared", "shared", "ordered", "seasoned"},
        {"soup", "bread", "pasta", "salad", "stew", "cake", "pie", "rice", "broth"},
        {"tasty", "spicy", "fresh", "sweet", "warm", "delicious", "hot", "rich"},
        {"{subj} {verb} a {mod} {obj} {when} .",
         "{subj} {opt} {verb} the {obj} {when} .",
         "the {obj} tastes {mod} {when} .",
         "{subj} {verb} {mod} {obj} for dinner .",
         "will {subj} serve the {mod} {obj} tonight ?",
         "{subj} {verb} the {obj} with {mod} bread ."},
    });

    g.topics.push_back({
        "travel",
        {"we", "they", "the kids", "my friends", "the tourists", "the students",
         "the children", "our neighbors"},
        {"going", "heading", "on my way", "walking", "driving", "riding", "cycling", "hiking"},
        {"beach", "city", "harbor", "museum", "market", "station", "town", "forest", "seaside",
         "port", "terminal", "bazaar"},
        {"old", "quiet", "crowded", "busy", "famous", "distant", "pretty", "lively", "ancient"},
        {"{subj} are {verb} to the {obj} {when} .",
         "{subj} are {opt} {verb} to the {mod} {obj} .",
         "tomorrow {subj} are {verb} to the {obj} .",
         "{subj} visited the {mod} {obj} {when} .",
         "are {subj} {verb} to the {obj} now ?",
         "{subj} are {verb} to the {mod} {obj} {when} ."},
    });

    g.synonym_classes = {
        {"going", "heading", "on my way"},
        {"cold", "chilly", "freezing"},
        {"great", "brilliant", "fantastic"},
        {"movie", "film"},
        {"watched", "saw", "viewed"},
        {"song", "tune", "track", "melody"},
        {"tasty", "delicious"},
        {"match", "game"},
        {"kids", "children"},
        {"city", "town"},
        {"wonderful", "lovely"},
        {"quiet", "calm"},
        {"played", "performed"},
        {"loud", "noisy"},
        {"scary", "frightening"},
        {"funny", "hilarious"},
        {"warm", "hot"},
        {"famous", "legendary"},
        {"old", "ancient"},
        {"crowded", "busy"},
        {"looks", "seems"},
        {"cloudy", "overcast"},
        {"windy", "breezy"},
        {"wrote", "composed"},
        {"praised", "applauded"},
        {"cooked", "prepared"},
        {"beach", "seaside"},
        {"harbor", "port"},
        {"trailer", "teaser"},
        {"station", "terminal"},
        {"market", "bazaar"},
        {"soup", "broth"},
    };

    g.fillers = {"really", "just", "often", "certainly", "probably", "definitely"};
    g.time_phrases = {"today",      "tonight",   "yesterday",  "this morning",
                      "this week",  "right now", "once more",  "these days"};
    return g;
}

namespace {

void append_words(std::vector<std::string>& out, std::string_view phrase) {
    for (auto& w : whitespace_tokens(phrase)) out.push_back(std::move(w));
}

const std::string& pick(const std::vector<std::string>& options, Rng& rng) {
    return options[rng.uniform(options.size())];
}

std::string expand_template(const TopicGrammar& topic, const std::string& tmpl,
                            const GrammarConfig& g, Rng& rng) {
    std::vector<std::string> words;
    std::size_t mod_index = topic.modifiers.size();  // sentinel: {mod} not yet drawn
    for (const auto& tok : whitespace_tokens(tmpl)) {
        if (tok == "{subj}") {
            append_words(words, pick(topic.subjects, rng));
        } else if (tok == "{verb}") {
            append_words(words, pick(topic.verbs, rng));
        } else if (tok == "{obj}") {
            append_words(words, pick(topic.objects, rng));
        } else if (tok == "{mod}") {
            mod_index = rng.uniform(topic.modifiers.size());
            append_words(words, topic.modifiers[mod_index]);
        } else if (tok == "{mod2}") {
            // Distinct from the first modifier when one was drawn.
            std::size_t j = rng.uniform(topic.modifiers.size());
            if (j == mod_index) j = (j + 1) % topic.modifiers.size();
            append_words(words, topic.modifiers[j]);
        } else if (tok == "{when}") {
            if (g.time_phrases.empty()) throw ConfigError("template uses {when} but the grammar has no time phrases");
            append_words(words, pick(g.time_phrases, rng));
        } else if (tok == "{opt}") {
            if (rng.next_double() < g.filler_slot_rate) append_words(words, pick(g.fillers, rng));
        } else {
            words.push_back(tok);
        }
    }
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

}  // namespace

std::vector<LabeledText> generate_synthetic_corpus(std::uint64_t seed, std::size_t n,
                                                   const GrammarConfig& grammar) {
    grammar.validate();
    std::vector<LabeledText> out;
    out.reserve(n);
    Rng base(seed);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = base.split(i);
        const TopicGrammar& topic = grammar.topics[rng.uniform(grammar.topics.size())];
        const std::string& tmpl = topic.templates[rng.uniform(topic.templates.size())];
        out.push_back({expand_template(topic, tmpl, grammar, rng), topic.name});
    }
    return out;
}

}  // namespace v2t
