#pragma once

#include <vector>

#include "finkey/linalg.hpp"

namespace finkey {

// Net Kraus operators of the post-processing map G (announcement, sifting and
// key map already composed) together with the key-register pinching Z.
struct PostProcessingMap {
    std::vector<CMat> kraus;                       // each output_dim x input_dim
    std::vector<std::vector<int>> pinching_blocks; // partition of output indices by key value
    int key_alphabet_size = 2;
    double perturbation_eps = 0.0;

    int input_dim() const { return kraus.empty() ? 0 : static_cast<int>(kraus.front().cols()); }
    int output_dim() const { return kraus.empty() ? 0 : static_cast<int>(kraus.front().rows()); }
    void validate() const;
};

CMat apply_G(const CMat& rho, const PostProcessingMap& map);
CMat apply_G(const DensityOperator& rho, const PostProcessingMap& map);
CMat apply_G_adjoint(const CMat& y, const PostProcessingMap& map);
CMat pinch_Z(const CMat& sigma, const PostProcessingMap& map);

// G_eps(rho) = (1 - eps) G(rho) + eps I / d'
CMat apply_G_eps(const CMat& rho, const PostProcessingMap& map);

// Tr[s (log2 s - log2 t)] on the support of s.
double relative_entropy(const CMat& s, const CMat& t);

double f_eps(const CMat& rho, const PostProcessingMap& map);
double f_eps(const DensityOperator& rho, const PostProcessingMap& map);
CMat grad_f_eps(const CMat& rho, const PostProcessingMap& map);
CMat grad_f_eps(const DensityOperator& rho, const PostProcessingMap& map);

double zeta_eps(double eps, int d_prime);

// Smallest eps (1e-12 raised by decades) with lambda_min(G_eps(rho)) > 1e-10.
double choose_perturbation(const CMat& rho, const PostProcessingMap& map, double start = 1e-12);

// Restrict the output space to the span of the Kraus ranges, block by block.
// The relative entropy is unchanged; the output dimension usually shrinks.
PostProcessingMap compress_output(const PostProcessingMap& map, double tol = 1e-12);

// Hessian of f_eps in the coordinates of herm_to_real.
RMat hessian_f_eps(const CMat& rho, const PostProcessingMap& map);

}  // namespace finkey
