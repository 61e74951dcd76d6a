#pragma once

namespace deconv {

inline constexpr const char* kArtifactName = "deconv";
inline constexpr const char* kVersion = "0.1.0";

// Output schema tags, pinned by tests. Bump when a column set changes.
inline constexpr const char* kSchemaWalkC = "walk-c.v1";
inline constexpr const char* kSchemaSolve = "solve.v1";
inline constexpr const char* kSchemaOracle = "oracle.v1";
inline constexpr const char* kSchemaAsymptotics = "asymptotics.v1";
inline constexpr const char* kSchemaSrbm = "srbm.v1";

}  // namespace deconv
