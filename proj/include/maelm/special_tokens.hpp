#pragma once

namespace maelm {

// Reserved vocabulary ids, fixed across the project.
inline constexpr int kPadId = 0;
inline constexpr int kClsId = 1;
inline constexpr int kMaskId = 2;
inline constexpr int kNumReserved = 3;

}  // namespace maelm
