#pragma once

namespace mocha {

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr int kWordlistsVersion = 1;

}  // namespace mocha
