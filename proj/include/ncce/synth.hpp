#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "ncce/corpus.hpp"
#include "ncce/lexicon.hpp"
#include "ncce/tensor.hpp"

namespace ncce {

// Bundled miniature sememe lexicon, byte-identical to data/mini_lexicon.tsv
// (a test pins the equality).
inline constexpr const char* kMiniLexiconTsv =
    R"LEX(# miniature sememe lexicon: word <TAB> sense <TAB> sememes
# heads
survivor	s1	human,alive,suffer,mishap
crew	s1	human,group,occupation
passenger	s1	human,travel
airplane	s1	aircraft,fly
jet	s1	aircraft,fly,speed
airliner	s1	aircraft,fly,commerce
boeing 737	s1	aircraft,fly,brand
engine	s1	machine,power,drive
motor	s1	machine,power,drive
turbine	s1	machine,power,rotate
runway	s1	ground,route,strip
airstrip	s1	ground,route,strip
tarmac	s1	ground,surface,strip
storm	s1	phenomenon,weather,violent
turbulence	s1	phenomenon,weather,air
wind	s1	phenomenon,weather,air
gust	s1	phenomenon,weather,air
baggage	s1	artifact,carry,store
suitcase	s1	artifact,carry,store
cargo	s1	artifact,carry,transport
freight	s1	artifact,carry,transport
airport	s1	place,facility,depart
aerodrome	s1	place,facility,depart
terminal	s1	place,facility,building
terminal	s2	artifact,computer
hub	s1	place,facility,center
radar	s1	instrument,detect,wave
gauge	s1	instrument,detect,measure
sensor	s1	instrument,detect,signal
# modifiers
senior	s1	attribute,rank
injured	s1	attribute,suffer
widebody	s1	attribute,size
chartered	s1	attribute,commerce
auxiliary	s1	attribute,extra
hydraulic	s1	attribute,liquid
parallel	s1	attribute,geometry
active	s1	attribute,use
severe	s1	attribute,degree
sudden	s1	attribute,time
checked	s1	attribute,confirm
oversized	s1	attribute,size
regional	s1	attribute,area
international	s1	attribute,area,world
faulty	s1	attribute,broken
backup	s1	attribute,extra
main	s1	attribute,importance
rear	s1	location,back
left	s1	location,side
right	s1	location,side
spare	s1	attribute,extra
forward	s1	location,front
port	s1	location,side
starboard	s1	location,side
north	s1	location,compass
south	s1	location,compass
inbound	s1	attribute,direction
outbound	s1	attribute,direction
primary	s1	attribute,order
standby	s1	attribute,order
# context words
reported	s1	act,communicate
declared	s1	act,communicate
inspected	s1	act,look
delayed	s1	act,time,late
taxied	s1	act,move
boarded	s1	act,move,enter
landed	s1	act,move,descend
smoke	s1	phenomenon,burn
alarm	s1	artifact,warn
checklist	s1	artifact,list
# broader coverage
control tower	s1	place,facility,direct
landing gear	s1	artifact,aircraft,wheel
gear	s1	artifact,tool
helicopter	s1	aircraft,fly,rotate
glider	s1	aircraft,fly,quiet
cockpit	s1	place,aircraft,control
hangar	s1	place,facility,store
propeller	s1	machine,rotate,drive
fuselage	s1	artifact,aircraft,body
aileron	s1	artifact,aircraft,control
altimeter	s1	instrument,detect,height
compass	s1	instrument,detect,direction
beacon	s1	instrument,signal,light
taxiway	s1	ground,route,strip
apron	s1	ground,surface,strip
apron	s2	artifact,clothing
gate	s1	place,facility,pass
gate	s2	artifact,barrier
fuel	s1	artifact,burn,power
oil	s1	artifact,liquid
tire	s1	artifact,wheel,rubber
wheel	s1	artifact,rotate,round
wing	s1	artifact,aircraft,fly
flap	s1	artifact,aircraft,control
brake	s1	artifact,stop
cabin	s1	place,aircraft,room
seat	s1	artifact,sit
belt	s1	artifact,fasten
mask	s1	artifact,cover,breathe
vest	s1	artifact,clothing,float
raft	s1	artifact,float,rescue
flare	s1	artifact,signal,light
siren	s1	artifact,warn,sound
medic	s1	human,occupation,cure
mechanic	s1	human,occupation,repair
inspector	s1	human,occupation,look
attendant	s1	human,occupation,serve
captain	s1	human,occupation,lead
officer	s1	human,occupation,rank
agent	s1	human,occupation,act
steward	s1	human,occupation,serve
dispatcher	s1	human,occupation,direct
)LEX";

inline Lexicon builtin_mini_lexicon(std::ostream* warnings = nullptr) {
    std::istringstream in(kMiniLexiconTsv);
    return load_lexicon(in, "<builtin>", warnings);
}

// One planted topic: synonymous heads (weighted; multiword heads hold spaces)
// plus topic-flavored modifiers. Compounds of one topic form one chain. The
// optional late head is a synonym that only enters circulation partway through
// the stream: the embedding table meets it rarely or never during training, so
// linking it to its chain-mates falls to the shared sememes.
struct TopicSpec {
    std::string name;
    std::vector<std::string> heads;
    std::vector<double> head_weights;
    std::string late_head;
    double late_weight = 2.0;
    std::vector<std::string> modifiers;
    // other topics' head words that may serve as the modifier next to the head
    // ("jet engine", "cargo terminal"): nominal nesting that makes compound
    // boundaries earn their keep
    std::vector<std::string> head_modifiers;
    // pairs of individuating modifiers, laid out flat {a1,b1, a2,b2, ...}. A
    // document may host two entities of one topic ("port engine" against
    // "starboard engine"); pair mates share identical sememe sets, so telling
    // the two chains apart falls to the words themselves, not the lexicon
    std::vector<std::string> discriminators;
};

struct VocabSpec {
    std::vector<TopicSpec> topics;
    std::vector<std::string> generic_modifiers;
    std::vector<std::string> fillers;    // inter-compound context, never inside spans
    std::vector<std::string> particles;  // glue between adjacent compounds, never inside spans

    void validate() const {
        if (topics.size() < 2) throw validation_error("vocab too small: need at least 2 topics");
        for (const TopicSpec& t : topics) {
            if (t.heads.empty())
                throw validation_error("vocab too small: topic '" + t.name + "' has no heads");
            if (t.heads.size() != t.head_weights.size())
                throw validation_error("topic '" + t.name + "': " +
                                       std::to_string(t.heads.size()) + " heads vs " +
                                       std::to_string(t.head_weights.size()) + " weights");
            for (double w : t.head_weights)
                if (w <= 0.0)
                    throw validation_error("topic '" + t.name + "': non-positive head weight");
            if (!t.late_head.empty() && t.late_weight <= 0.0)
                throw validation_error("topic '" + t.name + "': non-positive late-head weight");
            if (t.discriminators.size() % 2 != 0)
                throw validation_error("topic '" + t.name + "': discriminators must come in pairs");
        }
        if (fillers.size() < 2) throw validation_error("vocab too small: need at least 2 fillers");
        if (particles.empty()) throw validation_error("vocab too small: need at least 1 particle");
    }
};

// Vocabulary aligned with the bundled lexicon: every head and modifier has a
// sense there, synonym heads share a topic sememe, and each topic's late head
// leans on the lexicon to be recognized as a chain-mate of the established
// synonyms it drifts in beside.
inline VocabSpec default_vocab_spec() {
    VocabSpec v;
    v.topics = {
        {"person", {"passenger", "crew", "survivor"}, {4, 2, 1}, "attendant", 2,
         {"senior", "injured"}, {}},
        {"aircraft", {"airplane", "jet", "airliner"}, {4, 2, 2}, "boeing 737", 2,
         {"widebody", "chartered"}, {"cargo"}},
        {"engine", {"engine", "motor"}, {4, 2}, "turbine", 2,
         {"auxiliary", "hydraulic"}, {"jet"}},
        {"runway", {"runway", "airstrip", "tarmac"}, {4, 2, 1}, "taxiway", 2,
         {"parallel", "active"}, {}},
        {"weather", {"storm", "turbulence", "wind"}, {2, 2, 2}, "gust", 2,
         {"severe", "sudden"}, {}},
        {"luggage", {"baggage", "suitcase", "cargo"}, {3, 2, 2}, "freight", 2,
         {"checked", "oversized"}, {"passenger"}},
        {"airport", {"airport", "terminal", "hub"}, {4, 2, 1}, "aerodrome", 2,
         {"regional", "international"}, {"cargo", "passenger"}},
        {"instrument", {"radar", "gauge", "sensor"}, {2, 2, 2}, "altimeter", 2,
         {"faulty", "backup"}, {"engine", "wind", "runway"}},
    };
    v.generic_modifiers = {"main", "rear", "left", "right", "spare", "forward"};
    v.fillers = {"reported", "declared", "inspected", "delayed", "taxied",
                 "boarded",  "landed",   "smoke",     "alarm",   "checklist",
                 "yesterday", "officials", "twice",   "again",   "safely"};
    v.particles = {"of", "and", "with", "near", "the", "a"};
    return v;
}

namespace detail {

inline void append_word(std::vector<std::string>& tokens, const std::string& word) {
    std::size_t pos = 0;
    while (pos < word.size()) {
        std::size_t sp = word.find(' ', pos);
        if (sp == std::string::npos) sp = word.size();
        tokens.push_back(word.substr(pos, sp - pos));
        pos = sp + 1;
    }
}

}  // namespace detail

inline Corpus synth_corpus(std::uint64_t seed, std::size_t n_docs, const VocabSpec& spec) {
    spec.validate();
    Rng rng(seed);

    // Drift: each late head enters circulation at a random point in the later
    // stream and ramps up from there. A tail split therefore carries heads the
    // head of the stream has seen rarely or never.
    std::vector<std::size_t> debut(spec.topics.size(), n_docs);
    for (std::size_t ti = 0; ti < spec.topics.size(); ++ti)
        if (!spec.topics[ti].late_head.empty())
            debut[ti] = static_cast<std::size_t>(static_cast<double>(n_docs) *
                                                 (0.45 + 0.45 * rng.uniform()));

    Corpus corpus;
    corpus.reserve(n_docs);
    for (std::size_t di = 0; di < n_docs; ++di) {
        std::size_t n_topics = 2 + (rng.bernoulli(0.5) ? 1 : 0);
        n_topics = std::min(n_topics, spec.topics.size());
        std::vector<std::size_t> topic_order(spec.topics.size());
        for (std::size_t i = 0; i < topic_order.size(); ++i) topic_order[i] = i;
        rng.shuffle(topic_order);

        // slot -> chain; each planted topic yields 3-4 mentions, an optional
        // extra topic yields a singleton
        struct Mention {
            std::size_t slot;
            std::vector<std::string> tokens;
        };
        std::vector<Mention> mentions;
        std::size_t n_slots = n_topics;
        for (std::size_t s = 0; s < n_topics; ++s) {
            std::size_t count = 3 + rng.index(2);
            for (std::size_t k = 0; k < count; ++k) mentions.push_back({s, {}});
        }
        if (spec.topics.size() > n_topics && rng.bernoulli(0.3)) {
            mentions.push_back({n_slots, {}});
            ++n_slots;
        }

        // Heads in circulation at this point of the stream, late head ramped.
        std::vector<std::vector<std::string>> heads(n_slots);
        std::vector<std::vector<double>> weights(n_slots);
        for (std::size_t s = 0; s < n_slots; ++s) {
            std::size_t ti = topic_order[s];
            const TopicSpec& topic = spec.topics[ti];
            heads[s] = topic.heads;
            weights[s] = topic.head_weights;
            if (di >= debut[ti]) {
                heads[s].push_back(topic.late_head);
                double ramp = std::min(1.0, static_cast<double>(di - debut[ti] + 1) / 12.0);
                weights[s].push_back(topic.late_weight * ramp);
            }
        }

        // Heads are dealt without replacement within a chain (weights steer
        // the order): chain-mates carry distinct synonyms, so what links them
        // is the shared sememes rather than one repeated surface form.
        std::vector<std::vector<std::size_t>> dealt(n_slots);
        for (Mention& m : mentions) {
            const TopicSpec& topic = spec.topics[topic_order[m.slot]];
            std::size_t n_mods = rng.index(3);
            std::vector<std::string> pool;
            for (std::size_t k = 0; k < n_mods; ++k) {
                const std::vector<std::string>& from =
                    !topic.modifiers.empty() && rng.bernoulli(0.5) ? topic.modifiers
                                                                   : spec.generic_modifiers;
                const std::string& mod = from[rng.index(from.size())];
                if (std::find(pool.begin(), pool.end(), mod) == pool.end()) pool.push_back(mod);
            }
            m.tokens = pool;
            // nominal nesting: another topic's head as the innermost modifier
            if (!topic.head_modifiers.empty() && rng.bernoulli(0.22))
                m.tokens.push_back(topic.head_modifiers[rng.index(topic.head_modifiers.size())]);

            std::vector<std::size_t>& used = dealt[m.slot];
            if (used.size() == heads[m.slot].size()) used.clear();
            std::vector<std::size_t> avail;
            std::vector<double> avail_w;
            for (std::size_t h = 0; h < heads[m.slot].size(); ++h)
                if (std::find(used.begin(), used.end(), h) == used.end()) {
                    avail.push_back(h);
                    avail_w.push_back(weights[m.slot][h]);
                }
            std::size_t pick = avail[rng.weighted(avail_w)];
            used.push_back(pick);
            detail::append_word(m.tokens, heads[m.slot][pick]);
        }
        rng.shuffle(mentions);

        std::vector<std::vector<std::string>> sentences;
        std::vector<Span> spans;
        std::vector<std::size_t> span_slots;
        std::size_t flat = 0, next = 0;
        while (next < mentions.size()) {
            std::vector<std::string> sent;
            std::size_t in_sentence = 1 + (rng.bernoulli(0.35) ? 1 : 0);
            std::size_t lead = 1 + rng.index(2);
            for (std::size_t k = 0; k < lead; ++k)
                sent.push_back(spec.fillers[rng.index(spec.fillers.size())]);
            for (std::size_t k = 0; k < in_sentence && next < mentions.size(); ++k, ++next) {
                const Mention& m = mentions[next];
                spans.push_back({flat + sent.size(), flat + sent.size() + m.tokens.size()});
                span_slots.push_back(m.slot);
                sent.insert(sent.end(), m.tokens.begin(), m.tokens.end());
                bool last_here = k + 1 == in_sentence || next + 1 == mentions.size();
                // mentions inside a sentence usually get glue, but sometimes
                // abut directly, so span boundaries cannot be read off the
                // particles alone
                bool glue = last_here ? rng.bernoulli(0.5) : rng.bernoulli(0.8);
                if (glue) {
                    sent.push_back(spec.particles[rng.index(spec.particles.size())]);
                    if (rng.bernoulli(0.4))
                        sent.push_back(spec.fillers[rng.index(spec.fillers.size())]);
                }
            }
            flat += sent.size();
            sentences.push_back(std::move(sent));
        }

        // ChainPartition wants compounds in ascending span order; regroup the
        // slot labels accordingly.
        std::vector<std::size_t> order(spans.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return spans[a] < spans[b]; });
        std::vector<Span> compounds;
        std::vector<std::vector<std::size_t>> chains(n_slots);
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            compounds.push_back(spans[order[rank]]);
            chains[span_slots[order[rank]]].push_back(rank);
        }

        char id[32];
        std::snprintf(id, sizeof(id), "synth-%04zu", di);
        AnnotatedDocument doc;
        doc.doc = Document::make(id, std::move(sentences));
        doc.gold = ChainPartition::make(std::move(compounds), std::move(chains),
                                        doc.doc.size());
        corpus.push_back(std::move(doc));
    }
    return corpus;
}

}  // namespace ncce
