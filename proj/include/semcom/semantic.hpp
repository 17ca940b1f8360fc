#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "semcom/rng.hpp"

namespace semcom {

/// One word sequence of a semantic triple ("man", "riding on", ...) together
/// with the probability that the extractor detected it.
struct Token {
    std::string text;            // non-empty lowercase words, single spaces
    double detection_prob = 1.0; // in (0,1]

    bool operator==(const Token& o) const { return text == o.text; }
};

/// (subject, relation, object). Relations are directional, so
/// (a, r, b) and (b, r, a) are distinct triples.
struct Triple {
    Token subject;
    Token relation;
    Token object;

    bool operator==(const Triple& o) const {
        return subject == o.subject && relation == o.relation && object == o.object;
    }
};

/// All semantic triples extracted from one image.
struct SceneGraph {
    std::string image_id;
    std::vector<Triple> triples; // length >= 1, no duplicates by text
};

/// Per-triple scores aligned with SceneGraph::triples; sums to 1.
using ScoreVector = std::vector<double>;

/// Sampling law for synthetic detection probabilities.
struct DetectionProbLaw {
    enum class Kind { beta, uniform };
    Kind kind = Kind::beta;
    double a = 5.0; // beta shape / uniform lower bound
    double b = 2.0; // beta shape / uniform upper bound

    double mean() const;
    double variance() const;
};

struct GeneratorParams {
    int triples_min = 3;
    int triples_max = 8;
    std::vector<std::string> vocab_objects;
    std::vector<std::string> vocab_relations;
    DetectionProbLaw detection_prob_law;

    static GeneratorParams defaults();
};

/// Throws std::invalid_argument if the token text is not a lowercase word
/// sequence or the detection probability leaves (0,1].
void validate_token(const Token& t);
void validate_graph(const SceneGraph& g);

int letter_count(const Token& t);

/// Alphabetic characters in all three tokens; spaces do not count.
int letter_count(const Triple& t);

/// Sum of letter_count over the list; 0 for an empty list.
long semantic_size(const std::vector<Triple>& triples);

/// Softmax of the per-triple detection-probability products.
ScoreVector triple_scores(const SceneGraph& graph);

/// Indices of `scores` in descending order, ties broken by original index.
std::vector<std::size_t> score_order(const ScoreVector& scores);

/// Shortest score-descending prefix whose cumulative score reaches `xi`;
/// all triples when no prefix reaches it. Returned in descending score order.
std::vector<Triple> select_triples(const SceneGraph& graph, const ScoreVector& scores, double xi);

/// Same selection, as the number of leading entries of `order` to keep.
std::size_t select_prefix_len(const ScoreVector& scores, const std::vector<std::size_t>& order,
                              double xi);

/// Synthetic stand-in for a scene-graph extraction model. Deterministic for a
/// fixed stream. Throws ConfigError when the vocabulary cannot produce
/// triples_max distinct triples.
SceneGraph generate_scene_graph(const GeneratorParams& params, const std::string& image_id,
                                rng::Stream& stream);

// --- dataset file (line-delimited JSON, version tag on line 1) ---

void write_dataset(std::ostream& out, const std::vector<SceneGraph>& graphs);
std::vector<SceneGraph> read_dataset(std::istream& in);
void write_dataset_file(const std::string& path, const std::vector<SceneGraph>& graphs);
std::vector<SceneGraph> read_dataset_file(const std::string& path);

}  // namespace semcom
