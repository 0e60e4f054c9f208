#pragma once

#include <string>
#include <vector>

namespace medsel {

enum class Correction { Bonferroni, Holm, Hochberg, Hommel, BH };

// Accepts bonferroni, holm, hochberg, hommel, bh (also "fdr"), case-insensitive.
Correction parse_correction(const std::string& name);
std::string to_string(Correction c);

// Adjusted p-values; each lies in [p_i, 1]. Throws InvalidInput for entries
// outside [0, 1].
std::vector<double> adjust_pvalues(const std::vector<double>& p, Correction method);

// Rejections from the method's own sequential rule at level alpha.
std::vector<bool> reject_sequential(const std::vector<double>& p, Correction method, double alpha);

}  // namespace medsel
