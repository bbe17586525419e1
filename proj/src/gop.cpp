#include "avth/gop.hpp"

#include "avth/error.hpp"

namespace avth {

uint32_t GopPlan::total_frames() const {
    if (groups.empty()) return 0;
    const GopGroup& last = groups.back();
    uint32_t end = last.keyframe_index;
    if (!last.target_indices.empty()) end = last.target_indices.back();
    return end + 1;
}

void GopPlan::validate() const {
    if (gop_size < 2) throw ConfigError("gop_size must be at least 2");
    uint32_t expect = 0;
    for (const GopGroup& g : groups) {
        if (g.keyframe_index != expect) throw ShapeError("GOP groups must be contiguous");
        ++expect;
        for (uint32_t t : g.target_indices) {
            if (t != expect) throw ShapeError("GOP target indices must be contiguous");
            ++expect;
        }
        if (1 + g.target_indices.size() > gop_size) throw ShapeError("GOP group too long");
    }
    for (size_t i = 0; i + 1 < groups.size(); ++i)
        if (groups[i].target_indices.size() + 1 != gop_size)
            throw ShapeError("only the final GOP may be short");
}

GopPlan partition(uint32_t total_frames, uint32_t gop_size) {
    if (total_frames < 1) throw ConfigError("total_frames must be at least 1");
    if (gop_size < 2) throw ConfigError("gop_size must be at least 2");
    GopPlan plan;
    plan.gop_size = gop_size;
    for (uint32_t start = 0; start < total_frames; start += gop_size) {
        GopGroup g;
        g.keyframe_index = start;
        uint32_t end = std::min(start + gop_size, total_frames);
        for (uint32_t t = start + 1; t < end; ++t) g.target_indices.push_back(t);
        plan.groups.push_back(std::move(g));
    }
    return plan;
}

}  // namespace avth
