#pragma once

#include <string>
#include <vector>

#include "eta/matrix_ops.hpp"

namespace eta {

// Static SVG heatmap of a latent grounding matrix, tokens down the side and
// concepts across the top, cell shading proportional to the value.
std::string heatmap_svg(const Matrix& alpha, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels);

// Fixed-width text grid fallback.
std::string heatmap_text(const Matrix& alpha, const std::vector<std::string>& row_labels,
                         const std::vector<std::string>& col_labels);

}  // namespace eta
