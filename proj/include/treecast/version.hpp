#pragma once

namespace treecast {

inline constexpr const char* version = "0.1.0";

}  // namespace treecast
