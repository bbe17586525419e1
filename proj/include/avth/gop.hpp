#pragma once

#include <cstdint>
#include <vector>

namespace avth {

struct GopGroup {
    uint32_t keyframe_index = 0;
    std::vector<uint32_t> target_indices;
};

// Contiguous, disjoint groups covering [0, total_frames). The first frame of
// every group is its keyframe; only the final group may be short.
struct GopPlan {
    uint32_t gop_size = 0;
    std::vector<GopGroup> groups;

    uint32_t total_frames() const;
    void validate() const;
};

GopPlan partition(uint32_t total_frames, uint32_t gop_size);

}  // namespace avth
