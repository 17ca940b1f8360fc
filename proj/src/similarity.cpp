#include "semcom/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "semcom/errors.hpp"

namespace semcom {

OrthonormalBasis gram_schmidt(const std::vector<Vec>& vectors, double drop_tol) {
    if (vectors.empty()) throw std::invalid_argument("gram_schmidt: no input vectors");
    OrthonormalBasis basis;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].size() != vectors[0].size())
            throw std::invalid_argument("gram_schmidt: dimension mismatch");
        const double input_norm = norm(vectors[i]);
        Vec v = vectors[i];
        for (int pass = 0; pass < 2; ++pass) {
            for (const Vec& u : basis.vectors) {
                const double c = dot(v, u);
                for (std::size_t j = 0; j < v.size(); ++j) v[j] -= c * u[j];
            }
        }
        const double residual = norm(v);
        if (residual < drop_tol * input_norm || residual == 0.0) continue;
        for (double& x : v) x /= residual;
        basis.vectors.push_back(std::move(v));
        basis.kept_indices.push_back(i);
    }
    if (basis.vectors.empty())
        throw DegenerateBasisError("gram_schmidt: all inputs linearly dependent or zero");
    return basis;
}

double iss(const Vec& image_vec, const std::vector<Vec>& triple_vecs, bool served,
           double drop_tol) {
    if (!served) return 0.0;
    if (triple_vecs.empty()) throw std::invalid_argument("iss: no triple vectors for served user");
    const double image_norm = norm(image_vec);
    if (image_norm <= 0.0) throw std::invalid_argument("iss: zero image vector");
    const OrthonormalBasis basis = gram_schmidt(triple_vecs, drop_tol);
    double sum_sq = 0.0;
    for (const Vec& u : basis.vectors) {
        const double c = std::fabs(dot(u, image_vec));
        sum_sq += c * c;
    }
    return std::min(1.0, std::sqrt(sum_sq) / image_norm);
}

double empirical_reliability(const std::vector<double>& iss_samples, double xi) {
    if (iss_samples.empty()) throw std::invalid_argument("empirical_reliability: no samples");
    const auto passing = std::count_if(iss_samples.begin(), iss_samples.end(),
                                       [xi](double s) { return s >= xi; });
    return static_cast<double>(passing) / static_cast<double>(iss_samples.size());
}

}  // namespace semcom
