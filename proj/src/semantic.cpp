#include "semcom/semantic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "semcom/errors.hpp"

namespace semcom {

namespace {

bool is_word_sequence(const std::string& s) {
    if (s.empty() || s.front() == ' ' || s.back() == ' ') return false;
    bool prev_space = false;
    for (char c : s) {
        if (c == ' ') {
            if (prev_space) return false;
            prev_space = true;
        } else if (c >= 'a' && c <= 'z') {
            prev_space = false;
        } else {
            return false;
        }
    }
    return true;
}

}  // namespace

double DetectionProbLaw::mean() const {
    return kind == Kind::beta ? a / (a + b) : 0.5 * (a + b);
}

double DetectionProbLaw::variance() const {
    if (kind == Kind::beta) return a * b / ((a + b) * (a + b) * (a + b + 1.0));
    const double w = b - a;
    return w * w / 12.0;
}

GeneratorParams GeneratorParams::defaults() {
    GeneratorParams p;
    p.vocab_objects = {"man",   "woman",  "bicycle", "horse", "tree",  "car",
                       "dog",   "racket", "shirt",   "road",  "house", "chair",
                       "table", "window", "helmet",  "fence"};
    p.vocab_relations = {"riding on", "holding", "standing on", "beside", "behind",
                         "under",     "wearing", "near",        "above",  "next to"};
    return p;
}

void validate_token(const Token& t) {
    if (!is_word_sequence(t.text))
        throw std::invalid_argument("token text must be non-empty lowercase words: '" + t.text +
                                    "'");
    if (!(t.detection_prob > 0.0) || t.detection_prob > 1.0)
        throw std::invalid_argument("detection probability must lie in (0,1]");
}

void validate_graph(const SceneGraph& g) {
    if (g.triples.empty()) throw std::invalid_argument("scene graph needs at least one triple");
    std::set<std::array<std::string, 3>> seen;
    for (const Triple& t : g.triples) {
        validate_token(t.subject);
        validate_token(t.relation);
        validate_token(t.object);
        if (!seen.insert({t.subject.text, t.relation.text, t.object.text}).second)
            throw std::invalid_argument("duplicate triple in scene graph '" + g.image_id + "'");
    }
}

int letter_count(const Token& t) {
    return static_cast<int>(std::count_if(t.text.begin(), t.text.end(),
                                          [](unsigned char c) { return std::isalpha(c) != 0; }));
}

int letter_count(const Triple& t) {
    return letter_count(t.subject) + letter_count(t.relation) + letter_count(t.object);
}

long semantic_size(const std::vector<Triple>& triples) {
    long total = 0;
    for (const Triple& t : triples) total += letter_count(t);
    return total;
}

ScoreVector triple_scores(const SceneGraph& graph) {
    if (graph.triples.empty()) throw std::invalid_argument("triple_scores on empty graph");
    ScoreVector scores(graph.triples.size());
    double sum = 0.0;
    for (std::size_t n = 0; n < graph.triples.size(); ++n) {
        const Triple& t = graph.triples[n];
        const double product =
            t.subject.detection_prob * t.relation.detection_prob * t.object.detection_prob;
        scores[n] = std::exp(product);
        sum += scores[n];
    }
    for (double& s : scores) s /= sum;
    return scores;
}

std::vector<std::size_t> score_order(const ScoreVector& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

std::size_t select_prefix_len(const ScoreVector& scores, const std::vector<std::size_t>& order,
                              double xi) {
    double cumulative = 0.0;
    for (std::size_t n = 0; n < order.size(); ++n) {
        cumulative += scores[order[n]];
        if (cumulative >= xi) return n + 1;
    }
    return order.size();
}

std::vector<Triple> select_triples(const SceneGraph& graph, const ScoreVector& scores, double xi) {
    if (scores.size() != graph.triples.size())
        throw std::invalid_argument("score vector not aligned with scene graph");
    const auto order = score_order(scores);
    const std::size_t len = select_prefix_len(scores, order, xi);
    std::vector<Triple> selected;
    selected.reserve(len);
    for (std::size_t n = 0; n < len; ++n) selected.push_back(graph.triples[order[n]]);
    return selected;
}

namespace {

double sample_detection_prob(const DetectionProbLaw& law, rng::Stream& stream) {
    double x = law.kind == DetectionProbLaw::Kind::beta ? stream.beta(law.a, law.b)
                                                        : stream.uniform(law.a, law.b);
    return std::clamp(x, 1e-12, 1.0);
}

}  // namespace

SceneGraph generate_scene_graph(const GeneratorParams& params, const std::string& image_id,
                                rng::Stream& stream) {
    if (params.triples_min < 1 || params.triples_min > params.triples_max)
        throw ConfigError("generator: need 1 <= triples_min <= triples_max");
    if (params.vocab_objects.size() < 2 || params.vocab_relations.empty())
        throw ConfigError("generator: vocabularies too small");
    const std::size_t distinct = params.vocab_objects.size() *
                                 (params.vocab_objects.size() - 1) *
                                 params.vocab_relations.size();
    if (distinct < static_cast<std::size_t>(params.triples_max))
        throw ConfigError("generator: vocabulary cannot produce " +
                          std::to_string(params.triples_max) + " distinct triples");

    const int n = params.triples_min +
                  static_cast<int>(stream.below(
                      static_cast<std::uint64_t>(params.triples_max - params.triples_min + 1)));

    SceneGraph graph;
    graph.image_id = image_id;
    std::set<std::array<std::string, 3>> seen;
    while (static_cast<int>(graph.triples.size()) < n) {
        const std::size_t si = stream.below(params.vocab_objects.size());
        std::size_t oi = stream.below(params.vocab_objects.size() - 1);
        if (oi >= si) ++oi; // subject and object come out distinct
        const std::size_t ri = stream.below(params.vocab_relations.size());
        const std::string& s = params.vocab_objects[si];
        const std::string& r = params.vocab_relations[ri];
        const std::string& o = params.vocab_objects[oi];
        if (!seen.insert({s, r, o}).second) continue;
        Triple t;
        t.subject = {s, sample_detection_prob(params.detection_prob_law, stream)};
        t.relation = {r, sample_detection_prob(params.detection_prob_law, stream)};
        t.object = {o, sample_detection_prob(params.detection_prob_law, stream)};
        graph.triples.push_back(std::move(t));
    }
    return graph;
}

// --- dataset IO ---

namespace {

constexpr const char* kDatasetFormat = "semcom-scenegraph-dataset";
constexpr int kDatasetVersion = 1;

nlohmann::json token_to_json(const Token& t) {
    return nlohmann::json{{"text", t.text}, {"mu", t.detection_prob}};
}

Token token_from_json(const nlohmann::json& j) {
    return Token{j.at("text").get<std::string>(), j.at("mu").get<double>()};
}

}  // namespace

void write_dataset(std::ostream& out, const std::vector<SceneGraph>& graphs) {
    nlohmann::json header{{"format", kDatasetFormat}, {"version", kDatasetVersion}};
    out << header.dump() << '\n';
    for (const SceneGraph& g : graphs) {
        nlohmann::json rec{{"image_id", g.image_id}, {"triples", nlohmann::json::array()}};
        for (const Triple& t : g.triples)
            rec["triples"].push_back(nlohmann::json{{"subject", token_to_json(t.subject)},
                                                    {"relation", token_to_json(t.relation)},
                                                    {"object", token_to_json(t.object)}});
        out << rec.dump() << '\n';
    }
}

std::vector<SceneGraph> read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("dataset: empty file");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("dataset: bad header line: ") + e.what());
    }
    if (header.value("format", "") != kDatasetFormat)
        throw ConfigError("dataset: unrecognized format tag");
    if (header.value("version", -1) != kDatasetVersion)
        throw ConfigError("dataset: unsupported version");

    std::vector<SceneGraph> graphs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("dataset: parse error on line " + std::to_string(lineno) + ": " +
                              e.what());
        }
        SceneGraph g;
        g.image_id = rec.at("image_id").get<std::string>();
        for (const auto& jt : rec.at("triples"))
            g.triples.push_back(Triple{token_from_json(jt.at("subject")),
                                       token_from_json(jt.at("relation")),
                                       token_from_json(jt.at("object"))});
        validate_graph(g);
        graphs.push_back(std::move(g));
    }
    return graphs;
}

void write_dataset_file(const std::string& path, const std::vector<SceneGraph>& graphs) {
    std::ofstream out(path);
    if (!out) throw ConfigError("dataset: cannot open for write: " + path);
    write_dataset(out, graphs);
}

std::vector<SceneGraph> read_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("dataset: cannot open: " + path);
    return read_dataset(in);
}

}  // namespace semcom
