#pragma once

#include <string>
#include <vector>

namespace depthpatch {

// Pure renderers over the CSV artifacts of evaluate/defend-eval; nothing is
// recomputed here.
void plot_ed_vs_distance(const std::string& sweep_csv, const std::string& out_png);
void plot_error_cdf(const std::string& errors_csv, const std::string& out_png);
// One chart per defense family found in the CSV; returns written paths.
std::vector<std::string> plot_defenses(const std::string& defense_csv, const std::string& out_dir);

// Renders every figure the input directory has data for; returns written paths.
std::vector<std::string> plot_all(const std::string& in_dir, const std::string& out_dir);

}  // namespace depthpatch
