#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "semcom/rng.hpp"
#include "semcom/semantic.hpp"

namespace semcom {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b);
double norm(const Vec& v);

/// Synthetic stand-in for a multimodal encoder. Each distinct token text maps
/// to a fixed random unit direction under token_seed, so triple and image
/// vectors are reproducible from (dimension, token_seed, image_noise_std)
/// alone. A token table loaded from file overrides the hashed directions.
class EmbeddingModel {
  public:
    EmbeddingModel(int dimension, std::uint64_t token_seed, double image_noise_std);

    int dimension() const { return dim_; }
    std::uint64_t token_seed() const { return token_seed_; }
    double image_noise_std() const { return image_noise_std_; }

    /// Unit direction for one token text.
    Vec token_direction(const std::string& text) const;

    /// Normalized sum of the three token directions.
    Vec embed_triple(const Triple& triple) const;

    /// Score-weighted sum of triple vectors plus isotropic noise whose total
    /// standard deviation (RMS norm) is image_noise_std, normalized to unit
    /// norm. Deterministic given the noise stream.
    Vec embed_image(const SceneGraph& graph, const ScoreVector& scores,
                    rng::Stream& noise) const;

    /// Load "token<TAB>v1 v2 ... vd" rows; vectors are normalized on load.
    void load_token_table(const std::string& path);

    std::size_t token_table_size() const { return table_.size(); }

  private:
    int dim_;
    std::uint64_t token_seed_;
    double image_noise_std_;
    std::unordered_map<std::string, Vec> table_;
};

}  // namespace semcom
