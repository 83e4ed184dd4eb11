#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"

using namespace onestory;

namespace {

/// Values exactly representable in f32, so a round-trip must reproduce them bit for bit.
EmbeddingMatrix f32_embedding(std::uint64_t seed, std::size_t m, std::size_t d) {
    auto e = support::random_embedding(seed, 6, {4, 5, 3}, m, d);
    e.data = e.data.unaryExpr([](double v) { return double(float(v)); });
    e.encoder_tag = "clip-l/penultimate";
    return e;
}

nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
    std::ofstream out(p, std::ios::trunc);
    out << j.dump(2);
}

}  // namespace

TEST(Interchange, RoundTripIsBitExact) {
    support::TempDir tmp("roundtrip");
    const auto e = f32_embedding(11, 77, 2048);
    write_interchange(e, tmp / "emb", "some prompt");
    const auto back = read_interchange(tmp / "emb");
    EXPECT_EQ(back.data, e.data);
    EXPECT_EQ(back.layout, e.layout);
    EXPECT_EQ(back.encoder_tag, e.encoder_tag);
    EXPECT_EQ(read_record(tmp / "emb").text, "some prompt");
}

TEST(Interchange, RoundTripPropertyOverShapesAndSeeds) {
    support::TempDir tmp("roundtrip-prop");
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t m = 20 + seed, d = 1 + 7 * seed;
        const auto e = f32_embedding(seed, m, d);
        const auto dir = tmp / ("e" + std::to_string(seed));
        write_interchange(e, dir);
        const auto back = read_interchange(dir);
        ASSERT_EQ(back.data, e.data) << seed;
        ASSERT_EQ(back.layout, e.layout) << seed;
        // Writing the read-back copy reproduces the same bytes.
        write_interchange(back, tmp / "again");
        std::ifstream a(dir / kBlobName, std::ios::binary), b(tmp / "again" / kBlobName, std::ios::binary);
        ASSERT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
    }
}

TEST(Interchange, DoublesAreStoredAsNearestF32) {
    support::TempDir tmp("narrow");
    auto e = support::random_embedding(5, 2, {2}, 8, 3);
    write_interchange(e, tmp / "x");
    const auto back = read_interchange(tmp / "x");
    for (Eigen::Index r = 0; r < e.data.rows(); ++r) {
        for (Eigen::Index c = 0; c < e.data.cols(); ++c) {
            EXPECT_EQ(back.data(r, c), double(float(e.data(r, c))));
        }
    }
}

TEST(Interchange, BlobIsRowMajorLittleEndianF32) {
    support::TempDir tmp("bytes");
    EmbeddingMatrix e{Matrix(3, 2), support::make_layout(1, {0}, 3), "t"};
    e.data << 1.0, -2.0, 0.5, 3.0, 0.0, -0.25;
    write_interchange(e, tmp / "x");
    std::ifstream in(tmp / "x" / kBlobName, std::ios::binary);
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
    const std::vector<unsigned char> expected = {
        0x00, 0x00, 0x80, 0x3f,  // 1.0
        0x00, 0x00, 0x00, 0xc0,  // -2.0
        0x00, 0x00, 0x00, 0x3f,  // 0.5
        0x00, 0x00, 0x40, 0x40,  // 3.0
        0x00, 0x00, 0x00, 0x00,  // 0.0
        0x00, 0x00, 0x80, 0xbe,  // -0.25
    };
    EXPECT_EQ(bytes, expected);

    const auto manifest = read_json(tmp / "x" / kManifestName);
    EXPECT_EQ(manifest["format"], "onestory-interchange");
    EXPECT_EQ(manifest["version"], 1);
    EXPECT_EQ(manifest["dtype"], "f32le");
    EXPECT_EQ(manifest["M"], 3);
    EXPECT_EQ(manifest["D"], 2);
    EXPECT_EQ(manifest["spans"]["sot"], nlohmann::json::array({0, 1}));
    EXPECT_EQ(manifest["spans"]["identity"], nlohmann::json::array({1, 2}));
    EXPECT_EQ(manifest["spans"]["frames"], nlohmann::json::parse("[[2,2]]"));
    EXPECT_EQ(manifest["spans"]["eot"], nlohmann::json::array({2, 3}));
}

TEST(Interchange, TruncatedBlobIsShapeMismatch) {
    support::TempDir tmp("truncated");
    write_interchange(f32_embedding(1, 24, 4), tmp / "x");
    std::filesystem::resize_file(tmp / "x" / kBlobName, 24 * 4 * 4 - 4);
    try {
        read_interchange(tmp / "x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
    }
}

TEST(Interchange, UnknownVersionOrFormatIsFormatError) {
    support::TempDir tmp("version");
    write_interchange(f32_embedding(1, 24, 4), tmp / "x");
    const auto path = tmp / "x" / kManifestName;
    const auto original = read_json(path);
    for (const auto& [key, value] : std::vector<std::pair<std::string, nlohmann::json>>{
             {"version", 2}, {"version", "1"}, {"format", "npy"}, {"dtype", "f64le"}, {"M", -1}}) {
        auto broken = original;
        broken[key] = value;
        write_json(path, broken);
        try {
            read_interchange(tmp / "x");
            FAIL() << key;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::FormatError) << key;
        }
    }
    write_json(path, original);
    EXPECT_NO_THROW(read_interchange(tmp / "x"));
}

TEST(Interchange, ReadValidatesSpans) {
    support::TempDir tmp("spans");
    write_interchange(f32_embedding(1, 24, 4), tmp / "x");
    const auto path = tmp / "x" / kManifestName;
    auto manifest = read_json(path);
    manifest["spans"]["eot"] = {23, 24};
    write_json(path, manifest);
    try {
        read_interchange(tmp / "x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SpanError);
    }
}

TEST(Interchange, WriteRejectsInvalidOrUnrepresentable) {
    support::TempDir tmp("reject");
    auto e = f32_embedding(1, 24, 4);
    e.data(0, 0) = 1e300;  // finite double, infinite f32
    EXPECT_THROW(write_interchange(e, tmp / "x"), Error);
    e.data(0, 0) = std::nan("");
    try {
        write_interchange(e, tmp / "y");
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.kind(), ErrorKind::NonFinite);
    }
}

TEST(Interchange, FeatureFilesHaveNoSpans) {
    support::TempDir tmp("features");
    FeatureMatrix f{oracle::random_matrix(3, 4, 384).cast<float>().cast<double>(), "dino-vits16"};
    write_features(f, tmp / "f");
    const auto back = read_features(tmp / "f");
    EXPECT_EQ(back.data, f.data);
    EXPECT_EQ(back.encoder_tag, "dino-vits16");
    EXPECT_FALSE(read_json(tmp / "f" / kManifestName).contains("spans"));
    try {
        read_interchange(tmp / "f");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::FormatError);
    }
}

TEST(Interchange, ExtractionRecipeIsPreserved) {
    support::TempDir tmp("extraction");
    InterchangeRecord rec{Matrix::Ones(2, 2), "tag", std::nullopt, "", {{"model", "x"}, {"pooling", "mean"}}};
    write_record(rec, tmp / "r");
    EXPECT_EQ(read_record(tmp / "r").extraction, rec.extraction);
}

TEST(Interchange, MissingDirectoryIsIoError) {
    try {
        read_interchange("/nonexistent/onestory");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::IoError);
    }
}

TEST(InterchangeEncoder, LooksUpByConsolidatedText) {
    support::TempDir tmp("encoder");
    const ToyEncoder toy(ToyEncoderConfig{});
    const auto set = support::kitten();
    auto whole = toy.encode(set);
    whole.data = whole.data.cast<float>().cast<double>();
    whole.encoder_tag = "stream-a";
    write_interchange(whole, tmp / "stories" / "kitten", consolidate(set).text);
    for (std::size_t i = 1; i <= set.frame_count(); ++i) {
        auto pair = toy.encode(pair_prompt(set, i));
        pair.encoder_tag = "stream-a";
        write_interchange(pair, tmp / "stories" / ("pair-" + std::to_string(i)), consolidate(pair_prompt(set, i)).text);
    }
    const InterchangeEncoder enc(tmp / "stories", std::string("stream-a"));
    EXPECT_EQ(enc.encode(set).data, whole.data);
    EXPECT_NO_THROW(enc.encode(pair_prompt(set, 3)));
    EXPECT_THROW(enc.encode(PromptSet{"z", "animals", "unknown", {"frame"}}), Error);

    const InterchangeEncoder other_tag(tmp / "stories", std::string("stream-b"));
    EXPECT_THROW(other_tag.encode(set), Error);
}
