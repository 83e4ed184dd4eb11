#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "support.hpp"

using namespace onestory;

namespace {

Tokenizer whitespace_tokenizer() {
    return [](std::string_view text) {
        std::vector<Token> out;
        bool in_word = false;
        for (char c : text) {
            if (c == ' ') {
                in_word = false;
            } else if (!in_word) {
                out.push_back(Token(out.size() + 2));
                in_word = true;
            }
        }
        return out;
    };
}

}  // namespace

TEST(Consolidate, KittenStoryJoinsInOrder) {
    const auto cp = consolidate(support::kitten());
    EXPECT_EQ(cp.text,
              "A watercolor of a cute kitten in a garden dressed in a superhero cape wearing a collar with a bell "
              "sitting in a basket dressed in a cute sweater");
    ASSERT_EQ(cp.segments.size(), 6u);
    EXPECT_EQ(cp.segments[0], "A watercolor of a cute kitten");
    EXPECT_EQ(cp.segments[5], "dressed in a cute sweater");
}

TEST(Consolidate, SingleFrame) {
    const auto cp = consolidate(PromptSet{"s", "humans", "identity", {"x"}});
    EXPECT_EQ(cp.text, "identity x");
    EXPECT_EQ(cp.segments, (std::vector<std::string>{"identity", "x"}));
}

TEST(Consolidate, SegmentsAreTrimmedAndJoinedWithOneSpace) {
    const auto cp = consolidate(PromptSet{"s", "humans", "  a man ", {" in rain", "at night  "}});
    EXPECT_EQ(cp.text, "a man in rain at night");
}

TEST(Consolidate, PermutingFramesPermutesSegments) {
    const auto base = support::kitten();
    std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    PromptSet permuted = base;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        permuted.frame_prompts[i] = base.frame_prompts[perm[i]];
    }
    const auto a = consolidate(base), b = consolidate(permuted);
    EXPECT_EQ(b.segments[0], a.segments[0]);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        EXPECT_EQ(b.segments[i + 1], a.segments[perm[i] + 1]);
    }
}

TEST(Consolidate, EmptySegmentIsEmptyPrompt) {
    try {
        consolidate(PromptSet{"s", "humans", "a man", {"x", " "}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyPrompt);
    }
}

TEST(PairPrompt, KeepsIdentityAndOneFrame) {
    const auto p = pair_prompt(support::kitten(), 2);
    EXPECT_EQ(p.identity_prompt, "A watercolor of a cute kitten");
    EXPECT_EQ(p.frame_prompts, (std::vector<std::string>{"dressed in a superhero cape"}));
    EXPECT_THROW(pair_prompt(support::kitten(), 6), Error);
}

TEST(Layout, HandCountedSpans) {
    // identity 5 tokens, frames 3 and 4, M = 16
    const auto layout = layout_from_counts({5, 3, 4}, 16);
    EXPECT_EQ(layout.sot, (TokenSpan{0, 1}));
    EXPECT_EQ(layout.identity, (TokenSpan{1, 6}));
    ASSERT_EQ(layout.frames.size(), 2u);
    EXPECT_EQ(layout.frames[0], (TokenSpan{6, 9}));
    EXPECT_EQ(layout.frames[1], (TokenSpan{9, 13}));
    EXPECT_EQ(layout.eot, (TokenSpan{13, 16}));
    EXPECT_NO_THROW(layout.validate());
}

TEST(Layout, ComputedFromTokenizer) {
    const PromptSet set{"s", "humans", "a b c d e", {"f g h", "i j k l"}};
    EXPECT_EQ(compute_layout(consolidate(set), whitespace_tokenizer(), 16), layout_from_counts({5, 3, 4}, 16));
}

TEST(Layout, ExactFitLeavesOneEot) {
    const auto layout = layout_from_counts({10, 4}, 16);
    EXPECT_EQ(layout.eot, (TokenSpan{15, 16}));
}

TEST(Layout, OneTokenTooManyOverflows) {
    try {
        layout_from_counts({11, 4}, 16);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Overflow);
    }
}

TEST(Layout, SpansBijectWithSegments) {
    RandomStream rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::size_t> counts;
        const auto segments = 2 + std::size_t(rng.uniform() * 10);
        for (std::size_t s = 0; s < segments; ++s) {
            counts.push_back(std::size_t(rng.uniform() * 6) + (s == 0 ? 1 : 0));
        }
        const auto content = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
        const auto m = content + 2 + std::size_t(rng.uniform() * 8);
        const auto layout = layout_from_counts(counts, m);
        ASSERT_NO_THROW(layout.validate());
        ASSERT_EQ(layout.total_tokens, m);
        ASSERT_EQ(layout.identity.size(), counts[0]);
        ASSERT_EQ(layout.frames.size(), counts.size() - 1);
        for (std::size_t i = 1; i < counts.size(); ++i) {
            ASSERT_EQ(layout.frame(i).size(), counts[i]);
        }
        // Validation also accepts an embedding built on every computed layout.
        ASSERT_NO_THROW(validate(EmbeddingMatrix{Matrix::Zero(Eigen::Index(m), 2), layout, ""}));
    }
}

TEST(Window, FortyTwoFramesWindowTen) {
    const auto v5 = sliding_window_view(42, 10, 5);
    EXPECT_EQ(v5.first, 1u);
    EXPECT_EQ(v5.last, 10u);
    EXPECT_EQ(v5.express_index, 5u);
    const auto v11 = sliding_window_view(42, 10, 11);
    EXPECT_EQ(v11.first, 2u);
    EXPECT_EQ(v11.last, 11u);
    EXPECT_EQ(v11.express_index, 10u);
}

TEST(Window, LargerThanStory) {
    const auto v = sliding_window_view(3, 10, 2);
    EXPECT_EQ(v.first, 1u);
    EXPECT_EQ(v.last, 3u);
    EXPECT_EQ(v.express_index, 2u);
}

TEST(Window, ExhaustiveAgainstRule) {
    for (std::size_t n = 1; n <= 50; ++n) {
        for (std::size_t t = 1; t <= 12; ++t) {
            for (std::size_t i = 1; i <= n; ++i) {
                const auto v = sliding_window_view(n, t, i);
                const auto o = oracle::window_rule(n, t, i);
                ASSERT_EQ(v.first, o.first) << n << " " << t << " " << i;
                ASSERT_EQ(v.last, o.last);
                ASSERT_EQ(v.express_index, o.express);
                ASSERT_EQ(v.last - v.first + 1, std::min(t, n));
                ASSERT_EQ(v.first + v.express_index - 1, i);
                ASSERT_EQ(v.window_size, t);
                ASSERT_EQ(v.frame_index, i);
            }
        }
    }
}

TEST(Window, OutOfRange) {
    EXPECT_THROW(sliding_window_view(5, 3, 0), Error);
    EXPECT_THROW(sliding_window_view(5, 3, 6), Error);
    EXPECT_THROW(sliding_window_view(5, 0, 1), Error);
}

TEST(Window, ApplyKeepsIdentityAndSelectsFrames) {
    PromptSet set{"s", "humans", "a man", {}};
    for (int i = 1; i <= 12; ++i) {
        set.frame_prompts.push_back("scene " + std::to_string(i));
    }
    const auto view = sliding_window_view(12, 5, 8);
    const auto windowed = apply_window(set, view);
    EXPECT_EQ(windowed.identity_prompt, "a man");
    EXPECT_EQ(windowed.frame_prompts,
              (std::vector<std::string>{"scene 4", "scene 5", "scene 6", "scene 7", "scene 8"}));
    EXPECT_EQ(windowed.frame_prompts[view.express_index - 1], "scene 8");
}
