#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace bglm {

inline constexpr std::size_t kNumBehaviors = 5;

// Fixed order used by label sidecars, classifier heads, and checkpoints.
inline constexpr std::array<std::string_view, kNumBehaviors> kBehaviorNames = {
    "Acceptance", "Blame", "Negativity", "Positivity", "Sadness"};

/// One value per behavior: {0,1} targets or [0,1] posteriors. Multi-label,
/// so the entries are independent and need not sum to anything.
using BehaviorLabels = std::array<double, kNumBehaviors>;

}  // namespace bglm
