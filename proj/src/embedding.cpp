#include "semcom/embedding.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "semcom/errors.hpp"

namespace semcom {

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

namespace {

void normalize_inplace(Vec& v) {
    const double n = norm(v);
    if (n <= 0.0) throw std::invalid_argument("cannot normalize a zero vector");
    for (double& x : v) x /= n;
}

}  // namespace

EmbeddingModel::EmbeddingModel(int dimension, std::uint64_t token_seed, double image_noise_std)
    : dim_(dimension), token_seed_(token_seed), image_noise_std_(image_noise_std) {
    if (dimension < 1) throw ConfigError("embedding dimension must be positive");
    if (image_noise_std < 0.0) throw ConfigError("image noise std must be nonnegative");
}

Vec EmbeddingModel::token_direction(const std::string& text) const {
    if (auto it = table_.find(text); it != table_.end()) return it->second;
    rng::Stream s(rng::mix(token_seed_, rng::hash_str(text)));
    Vec v(dim_);
    for (double& x : v) x = s.normal();
    normalize_inplace(v);
    return v;
}

Vec EmbeddingModel::embed_triple(const Triple& triple) const {
    const Vec s = token_direction(triple.subject.text);
    const Vec r = token_direction(triple.relation.text);
    const Vec o = token_direction(triple.object.text);
    Vec sum(dim_);
    for (int i = 0; i < dim_; ++i) sum[i] = s[i] + r[i] + o[i];
    normalize_inplace(sum);
    return sum;
}

Vec EmbeddingModel::embed_image(const SceneGraph& graph, const ScoreVector& scores,
                                rng::Stream& noise) const {
    if (scores.size() != graph.triples.size())
        throw std::invalid_argument("embed_image: scores not aligned with graph");
    Vec image(dim_, 0.0);
    for (std::size_t n = 0; n < graph.triples.size(); ++n) {
        const Vec t = embed_triple(graph.triples[n]);
        for (int i = 0; i < dim_; ++i) image[i] += scores[n] * t[i];
    }
    if (image_noise_std_ > 0.0) {
        const double component_std = image_noise_std_ / std::sqrt(static_cast<double>(dim_));
        for (int i = 0; i < dim_; ++i) image[i] += noise.normal(0.0, component_std);
    }
    normalize_inplace(image);
    return image;
}

void EmbeddingModel::load_token_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("token table: cannot open: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ConfigError("token table: missing tab separator on line " +
                              std::to_string(lineno));
        const std::string token = line.substr(0, tab);
        std::istringstream values(line.substr(tab + 1));
        Vec v;
        v.reserve(dim_);
        double x;
        while (values >> x) v.push_back(x);
        if (static_cast<int>(v.size()) != dim_)
            throw ConfigError("token table: expected " + std::to_string(dim_) +
                              " components on line " + std::to_string(lineno) + ", got " +
                              std::to_string(v.size()));
        normalize_inplace(v);
        table_[token] = std::move(v);
    }
}

}  // namespace semcom
