#pragma once

// Prompt consolidation: one sentence for the whole story, its token-span
// layout, and sliding-window views for stories longer than the encoder limit.

#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "onestory/core.hpp"

namespace onestory {

using Token = std::int32_t;

/// Maps a text segment to its tokens, without SOT/EOT.
using Tokenizer = std::function<std::vector<Token>(std::string_view)>;

struct ConsolidatedPrompt {
    std::string text;
    std::vector<std::string> segments;  // identity, frame_1..frame_N
    PromptSet source;

    std::size_t frame_count() const noexcept { return segments.empty() ? 0 : segments.size() - 1; }
};

inline ConsolidatedPrompt consolidate(const PromptSet& set) {
    set.validate();
    ConsolidatedPrompt cp;
    cp.source = set;
    cp.segments.reserve(set.frame_count() + 1);
    cp.segments.push_back(detail::trim(set.identity_prompt));
    for (const auto& frame : set.frame_prompts) {
        cp.segments.push_back(detail::trim(frame));
    }
    for (std::size_t i = 0; i < cp.segments.size(); ++i) {
        if (i > 0) {
            cp.text += ' ';
        }
        cp.text += cp.segments[i];
    }
    return cp;
}

/// The two-segment prompt [P0; Pi] used by multi-prompt generation (1-based i).
inline PromptSet pair_prompt(const PromptSet& set, std::size_t frame) {
    if (frame < 1 || frame > set.frame_count()) {
        throw Error(ErrorKind::IndexOutOfRange, "frame " + std::to_string(frame) + " outside [1, " +
                                                    std::to_string(set.frame_count()) + "]");
    }
    return PromptSet{set.id, set.superclass, set.identity_prompt, {set.frame_prompts[frame - 1]}};
}

inline std::vector<std::vector<Token>> tokenize_segments(const ConsolidatedPrompt& cp, const Tokenizer& tokenizer) {
    std::vector<std::vector<Token>> tokens;
    tokens.reserve(cp.segments.size());
    for (const auto& segment : cp.segments) {
        tokens.push_back(tokenizer(segment));
    }
    return tokens;
}

/// Token count per segment (identity, frame_1..N) before SOT/EOT padding.
inline std::vector<std::size_t> segment_token_counts(const ConsolidatedPrompt& cp, const Tokenizer& tokenizer) {
    std::vector<std::size_t> counts;
    for (const auto& tokens : tokenize_segments(cp, tokenizer)) {
        counts.push_back(tokens.size());
    }
    return counts;
}

/// Lays out [SOT | identity | frame_1 .. frame_N | EOT padding] over `max_tokens` positions.
inline PromptLayout layout_from_counts(const std::vector<std::size_t>& counts, std::size_t max_tokens) {
    if (counts.empty()) {
        throw Error(ErrorKind::InvalidArgument, "layout needs at least the identity segment");
    }
    const std::size_t content = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    if (max_tokens < 2 || content > max_tokens - 2) {
        throw Error(ErrorKind::Overflow, std::to_string(content) + " content tokens exceed the limit of " +
                                             std::to_string(max_tokens < 2 ? 0 : max_tokens - 2));
    }
    PromptLayout layout;
    layout.total_tokens = max_tokens;
    layout.sot = {0, 1};
    std::size_t cursor = 1;
    layout.identity = {cursor, cursor + counts[0]};
    cursor = layout.identity.end;
    for (std::size_t i = 1; i < counts.size(); ++i) {
        layout.frames.push_back({cursor, cursor + counts[i]});
        cursor += counts[i];
    }
    layout.eot = {cursor, max_tokens};
    return layout;
}

inline PromptLayout compute_layout(const ConsolidatedPrompt& cp, const Tokenizer& tokenizer, std::size_t max_tokens) {
    return layout_from_counts(segment_token_counts(cp, tokenizer), max_tokens);
}

/// Frames [first, last] (1-based, inclusive) used to generate `frame_index`.
struct WindowView {
    std::size_t window_size = 0;
    std::size_t frame_index = 0;
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t express_index = 0;  // position of frame_index inside the window, 1-based

    std::size_t length() const noexcept { return last - first + 1; }

    friend bool operator==(const WindowView&, const WindowView&) = default;
};

inline WindowView sliding_window_view(std::size_t frame_count, std::size_t window_size, std::size_t frame_index) {
    if (window_size < 1) {
        throw Error(ErrorKind::IndexOutOfRange, "window size must be at least 1");
    }
    if (frame_index < 1 || frame_index > frame_count) {
        throw Error(ErrorKind::IndexOutOfRange, "frame " + std::to_string(frame_index) + " outside [1, " +
                                                    std::to_string(frame_count) + "]");
    }
    WindowView view{window_size, frame_index, 0, 0, 0};
    if (frame_index <= window_size) {
        view.first = 1;
        view.last = std::min(window_size, frame_count);
        view.express_index = frame_index;
    } else {
        view.first = frame_index - window_size + 1;
        view.last = frame_index;
        view.express_index = window_size;
    }
    return view;
}

/// The prompt set restricted to the frames of `view`.
inline PromptSet apply_window(const PromptSet& set, const WindowView& view) {
    if (view.last > set.frame_count() || view.first < 1 || view.first > view.last) {
        throw Error(ErrorKind::IndexOutOfRange, "window does not fit the prompt set");
    }
    PromptSet windowed{set.id, set.superclass, set.identity_prompt, {}};
    windowed.frame_prompts.assign(set.frame_prompts.begin() + std::ptrdiff_t(view.first - 1),
                                  set.frame_prompts.begin() + std::ptrdiff_t(view.last));
    return windowed;
}

}  // namespace onestory
