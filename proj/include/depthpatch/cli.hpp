#pragma once

#include <string>
#include <vector>

namespace depthpatch {

// Runs one verb (attack, evaluate, defend-eval, export-lidar, plot).
// Exit codes: 0 success, 2 config error, 3 asset error, 4 backend unavailable,
// 5 runtime failure.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, char** argv);

}  // namespace depthpatch
