#pragma once

#include <cstddef>
#include <vector>

#include "semcom/embedding.hpp"

namespace semcom {

struct OrthonormalBasis {
    std::vector<Vec> vectors;
    std::vector<std::size_t> kept_indices; // inputs that survived orthogonalization
};

/// Gram-Schmidt in input order with one re-orthogonalization sweep per vector
/// (single-pass projection cannot hold the 1e-10 orthogonality bound near
/// linear dependence). A vector whose residual falls below drop_tol relative
/// to its input norm is dropped. Throws DegenerateBasisError when everything
/// drops.
OrthonormalBasis gram_schmidt(const std::vector<Vec>& vectors, double drop_tol = 1e-8);

/// Projection-based image-to-graph semantic similarity in [0,1]: the norm of
/// the image vector's projection onto the orthonormalized span of the
/// transmitted triple vectors, over the image vector's norm. 0 when the user
/// was not served.
double iss(const Vec& image_vec, const std::vector<Vec>& triple_vecs, bool served,
           double drop_tol = 1e-8);

/// Fraction of similarity samples meeting the threshold.
double empirical_reliability(const std::vector<double>& iss_samples, double xi);

}  // namespace semcom
