#pragma once

#include <string>
#include <vector>

namespace maelm {

// Single entry point behind the `maelm` binary. Exit codes: 0 success,
// 1 contract/usage error, 2 diverged training, 3 failed verification.
int dispatch(const std::vector<std::string>& args);

}  // namespace maelm
