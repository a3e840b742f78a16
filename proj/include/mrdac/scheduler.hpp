#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mrdac/error.hpp"

namespace mrdac {

enum class Strategy : std::uint8_t {
    RRB = 0,     // progressive reference buffer: past references only
    RP = 1,      // pre-selected references at uniform spacing, past or future
    RP_RRB = 2,  // nearest past + nearest future first, then fill by proximity
    BIDIR = 3,   // RRB plus one bounded-delay future reference
};

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::RRB: return "rrb";
        case Strategy::RP: return "rp";
        case Strategy::RP_RRB: return "rp_rrb";
        case Strategy::BIDIR: return "bidir";
    }
    return "?";
}

struct GopConfig {
    Strategy strategy = Strategy::RP_RRB;
    std::uint32_t rp_interval = 8;  // reference spacing for RP-style strategies
    std::uint32_t max_refs = 2;     // N
    double max_future_delay_s = 2.0;
    double fps = 25.0;
    std::uint32_t gop_size = 8;     // reference spacing for RRB-style strategies

    std::uint32_t future_delay_frames() const {
        return static_cast<std::uint32_t>(std::floor(max_future_delay_s * fps));
    }
};

enum class FrameRole : std::uint8_t { REFERENCE = 0, ANIMATED = 1 };

struct SchedulePlan {
    std::vector<FrameRole> roles;
    std::vector<std::vector<std::uint32_t>> refs;  // per frame; empty for REFERENCE

    std::size_t num_frames() const { return roles.size(); }
    std::size_t num_references() const {
        return static_cast<std::size_t>(
            std::count(roles.begin(), roles.end(), FrameRole::REFERENCE));
    }
};

struct PlanViolation {
    std::string rule;
    std::uint32_t frame;
};

namespace detail {

inline std::vector<std::uint32_t> reference_positions(std::uint32_t t_frames,
                                                      std::uint32_t spacing) {
    std::vector<std::uint32_t> r;
    for (std::uint32_t f = 0; f < t_frames; f += std::max(spacing, 1u)) r.push_back(f);
    return r;
}

// N nearest references by |t - r|, ties to the past, ordered by distance.
inline std::vector<std::uint32_t> nearest_refs(const std::vector<std::uint32_t>& refs,
                                               std::uint32_t t, std::uint32_t n) {
    std::vector<std::uint32_t> sorted = refs;
    std::stable_sort(sorted.begin(), sorted.end(), [t](std::uint32_t a, std::uint32_t b) {
        const std::int64_t da = std::abs(static_cast<std::int64_t>(a) - t);
        const std::int64_t db = std::abs(static_cast<std::int64_t>(b) - t);
        if (da != db) return da < db;
        return a < b;  // tie: prefer the past reference
    });
    if (sorted.size() > n) sorted.resize(n);
    return sorted;
}

}  // namespace detail

// Per-frame coding plan. Pure function of (t_frames, cfg).
inline SchedulePlan plan(std::uint32_t t_frames, const GopConfig& cfg) {
    if (t_frames == 0) throw InvalidInputError("plan needs at least one frame");
    if (cfg.max_refs < 1) throw InvalidInputError("plan needs max_refs >= 1");
    if (cfg.rp_interval < 1) throw InvalidInputError("plan needs rp_interval >= 1");

    const bool rp_style = cfg.strategy == Strategy::RP || cfg.strategy == Strategy::RP_RRB;
    const std::vector<std::uint32_t> ref_pos = detail::reference_positions(
        t_frames, rp_style ? cfg.rp_interval : cfg.gop_size);

    SchedulePlan p;
    p.roles.assign(t_frames, FrameRole::ANIMATED);
    p.refs.assign(t_frames, {});
    for (std::uint32_t r : ref_pos) p.roles[r] = FrameRole::REFERENCE;

    for (std::uint32_t t = 0; t < t_frames; ++t) {
        if (p.roles[t] == FrameRole::REFERENCE) continue;
        std::vector<std::uint32_t> past, future;
        for (std::uint32_t r : ref_pos) (r < t ? past : future).push_back(r);

        std::vector<std::uint32_t>& out = p.refs[t];
        switch (cfg.strategy) {
            case Strategy::RRB: {
                // most recent past references
                for (auto it = past.rbegin(); it != past.rend() && out.size() < cfg.max_refs; ++it)
                    out.push_back(*it);
                break;
            }
            case Strategy::RP: {
                out = detail::nearest_refs(ref_pos, t, cfg.max_refs);
                break;
            }
            case Strategy::RP_RRB: {
                if (!past.empty()) out.push_back(past.back());
                if (!future.empty() && out.size() < cfg.max_refs) out.push_back(future.front());
                std::vector<std::uint32_t> remaining;
                for (std::uint32_t r : ref_pos)
                    if (std::find(out.begin(), out.end(), r) == out.end()) remaining.push_back(r);
                for (std::uint32_t r : detail::nearest_refs(remaining, t, cfg.max_refs))
                    if (out.size() < cfg.max_refs) out.push_back(r);
                break;
            }
            case Strategy::BIDIR: {
                // one future reference (the next one) within the delay bound,
                // then the most recent past references
                if (!future.empty() && future.front() - t <= cfg.future_delay_frames())
                    out.push_back(future.front());
                for (auto it = past.rbegin(); it != past.rend() && out.size() < cfg.max_refs; ++it)
                    out.push_back(*it);
                break;
            }
        }
    }
    return p;
}

// Checks every SchedulePlan invariant; one entry per violated rule, carrying
// the first offending frame. Violations are data, not errors.
inline std::vector<PlanViolation> validate_plan(const SchedulePlan& p, const GopConfig& cfg) {
    std::vector<PlanViolation> v;
    auto report = [&](const char* rule, std::uint32_t frame) {
        for (const PlanViolation& pv : v)
            if (pv.rule == rule) return;
        v.push_back({rule, frame});
    };

    if (p.roles.empty()) {
        report("plan-empty", 0);
        return v;
    }
    if (p.roles[0] != FrameRole::REFERENCE) report("frame0-not-reference", 0);
    if (p.refs.size() != p.roles.size()) report("refs-roles-size-mismatch", 0);

    const std::uint32_t t_frames = static_cast<std::uint32_t>(p.roles.size());
    for (std::uint32_t t = 0; t < t_frames && t < p.refs.size(); ++t) {
        const auto& refs = p.refs[t];
        if (p.roles[t] == FrameRole::REFERENCE) {
            if (!refs.empty()) report("reference-frame-has-refs", t);
            continue;
        }
        if (refs.empty()) report("animated-refs-empty", t);
        if (refs.size() > cfg.max_refs) report("refs-exceed-max", t);
        std::uint32_t future_count = 0;
        for (std::uint32_t r : refs) {
            if (r >= t_frames || p.roles[r] != FrameRole::REFERENCE) {
                report("ref-not-a-reference-frame", t);
                continue;
            }
            if (r > t) {
                ++future_count;
                if (cfg.strategy == Strategy::BIDIR && r - t > cfg.future_delay_frames())
                    report("bidir-future-delay-exceeded", t);
            }
        }
        if (cfg.strategy == Strategy::BIDIR && future_count > 1)
            report("bidir-multiple-future-refs", t);
    }
    return v;
}

}  // namespace mrdac
