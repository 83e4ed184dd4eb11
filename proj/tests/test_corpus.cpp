#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "support.hpp"

using namespace onestory;

TEST(Corpus, BundledCorpusHasBenchmarkShape) {
    const auto corpus = load_corpus(support::corpus_path());
    ASSERT_EQ(corpus.size(), 20u);
    std::set<std::string> superclasses, ids;
    for (const auto& set : corpus) {
        EXPECT_FALSE(benchmark_shape_issue(set).has_value()) << set.id;
        superclasses.insert(set.superclass);
        ids.insert(set.id);
    }
    EXPECT_EQ(superclasses.size(), kSuperclasses.size());
    EXPECT_EQ(ids.size(), corpus.size());
}

TEST(Corpus, BundledCorpusFitsToyEncoder) {
    const ToyEncoder encoder(ToyEncoderConfig{});
    for (const auto& set : load_corpus(support::corpus_path())) {
        EXPECT_NO_THROW(encoder.encode(set)) << set.id;
    }
}

TEST(Corpus, ContainsKittenExample) {
    const auto corpus = load_corpus(support::corpus_path());
    const auto it = std::find_if(corpus.begin(), corpus.end(), [](const PromptSet& s) {
        return s.identity_prompt == support::kitten().identity_prompt;
    });
    ASSERT_NE(it, corpus.end());
    EXPECT_EQ(it->frame_prompts, support::kitten().frame_prompts);
}

TEST(Corpus, JsonRoundTrip) {
    const auto set = support::kitten();
    EXPECT_EQ(prompt_set_from_json(prompt_set_to_json(set)), set);
}

TEST(Corpus, BlankLinesSkipped) {
    std::istringstream in(
        R"({"id":"a","superclass":"humans","identity_prompt":"a man","frame_prompts":["x","y"]})"
        "\n\n  \n"
        R"({"id":"b","superclass":"foods","identity_prompt":"a pie","frame_prompts":["z"]})"
        "\n");
    const auto corpus = parse_corpus(in);
    ASSERT_EQ(corpus.size(), 2u);
    EXPECT_EQ(corpus[1].frame_prompts, std::vector<std::string>{"z"});
}

TEST(Corpus, MalformedInputsRejected) {
    for (const std::string line : {
             R"({"id":"a","superclass":"humans","identity_prompt":"a man"})",
             R"({"id":"a","superclass":"humans","identity_prompt":"a man","frame_prompts":"x"})",
             R"({"id":"a","superclass":"humans","identity_prompt":"a man","frame_prompts":[1]})",
             R"({"id":1,"superclass":"humans","identity_prompt":"a man","frame_prompts":["x"]})",
             R"({"id":"a","superclass":"humans","identity_prompt":" ","frame_prompts":["x"]})",
             R"([1,2,3])",
             R"({not json)",
         }) {
        std::istringstream in(line + "\n");
        EXPECT_THROW(parse_corpus(in), Error) << line;
    }
}

TEST(Corpus, DuplicateIdsRejected) {
    std::istringstream in(
        R"({"id":"a","superclass":"humans","identity_prompt":"a man","frame_prompts":["x"]})"
        "\n"
        R"({"id":"a","superclass":"humans","identity_prompt":"a woman","frame_prompts":["y"]})"
        "\n");
    EXPECT_THROW(parse_corpus(in), Error);
}

TEST(Corpus, ShapeIssues) {
    PromptSet set = support::kitten();
    EXPECT_FALSE(benchmark_shape_issue(set));
    set.superclass = "vehicles";
    EXPECT_TRUE(benchmark_shape_issue(set));
    set.superclass = "animals";
    set.frame_prompts.resize(4);
    EXPECT_TRUE(benchmark_shape_issue(set));
    set.frame_prompts.resize(11, "x");
    EXPECT_TRUE(benchmark_shape_issue(set));
}

TEST(Corpus, MissingFileIsIoError) {
    try {
        load_corpus("/nonexistent/corpus.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::IoError);
    }
}
