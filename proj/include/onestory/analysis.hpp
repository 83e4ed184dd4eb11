#pragma once

// Distance statistics over frame embeddings and frame features: how tightly
// the frames of one story cluster under each setup or method.

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "onestory/consolidation.hpp"
#include "onestory/core.hpp"
#include "onestory/encoder.hpp"

namespace onestory {

/// Mean Euclidean distance over all unordered pairs.
inline double pairwise_mean_distance(std::span<const Vector> features) {
    if (features.size() < 2) {
        throw Error(ErrorKind::TooFewVectors, "need at least two vectors, got " + std::to_string(features.size()));
    }
    const auto dim = features.front().size();
    for (const auto& f : features) {
        if (f.size() != dim) {
            throw Error(ErrorKind::DimensionMismatch, "vectors of length " + std::to_string(dim) + " and " +
                                                          std::to_string(f.size()));
        }
    }
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < features.size(); ++a) {
        for (std::size_t b = a + 1; b < features.size(); ++b) {
            total += (features[a] - features[b]).norm();
            ++pairs;
        }
    }
    return total / double(pairs);
}

enum class FramePooling {
    Mean,      // one mean-pooled vector per frame span
    PerToken,  // every token row of a frame span against every row of the other frame
};

/// Mean-pooled row of frame `frame` (1-based).
inline Vector frame_span_features(const EmbeddingMatrix& c, std::size_t frame) {
    const TokenSpan& span = c.layout.frame(frame);
    if (span.size() == 0) {
        throw Error(ErrorKind::SpanError, "frame " + std::to_string(frame) + " has no tokens");
    }
    return c.span_rows(span).colwise().mean().transpose();
}

/// Mean over frame pairs of the mean distance between their token rows.
inline double pairwise_mean_token_distance(std::span<const Matrix> frames) {
    if (frames.size() < 2) {
        throw Error(ErrorKind::TooFewVectors, "need at least two frames, got " + std::to_string(frames.size()));
    }
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < frames.size(); ++a) {
        for (std::size_t b = a + 1; b < frames.size(); ++b) {
            if (frames[a].cols() != frames[b].cols()) {
                throw Error(ErrorKind::DimensionMismatch, "frame token widths differ");
            }
            if (frames[a].rows() == 0 || frames[b].rows() == 0) {
                throw Error(ErrorKind::SpanError, "frame has no tokens");
            }
            double sum = 0.0;
            for (Eigen::Index r = 0; r < frames[a].rows(); ++r) {
                for (Eigen::Index s = 0; s < frames[b].rows(); ++s) {
                    sum += (frames[a].row(r) - frames[b].row(s)).norm();
                }
            }
            total += sum / double(frames[a].rows() * frames[b].rows());
            ++pairs;
        }
    }
    return total / double(pairs);
}

struct SetDistances {
    std::string set_id;
    std::vector<double> distances;  // one per method, in DistanceReport::methods order
};

/// Per-set mean pairwise distances for several methods. `win_rate` is the
/// fraction of sets where methods[0] is strictly below methods[1].
struct DistanceReport {
    std::vector<std::string> methods;
    std::vector<SetDistances> per_set;
    std::vector<double> method_means;
    std::vector<std::size_t> ranking;  // method indices, smallest mean first
    double win_rate = 0.0;
};

namespace detail {

inline void finalize_report(DistanceReport& report) {
    const std::size_t k = report.methods.size();
    report.method_means.assign(k, 0.0);
    for (const auto& s : report.per_set) {
        for (std::size_t m = 0; m < k; ++m) {
            report.method_means[m] += s.distances[m];
        }
    }
    if (!report.per_set.empty()) {
        for (auto& mean : report.method_means) {
            mean /= double(report.per_set.size());
        }
    }
    report.ranking.resize(k);
    std::iota(report.ranking.begin(), report.ranking.end(), std::size_t{0});
    std::stable_sort(report.ranking.begin(), report.ranking.end(),
                     [&](std::size_t a, std::size_t b) { return report.method_means[a] < report.method_means[b]; });
    report.win_rate = 0.0;
    if (k >= 2 && !report.per_set.empty()) {
        const auto wins = std::count_if(report.per_set.begin(), report.per_set.end(),
                                        [](const SetDistances& s) { return s.distances[0] < s.distances[1]; });
        report.win_rate = double(wins) / double(report.per_set.size());
    }
}

}  // namespace detail

inline constexpr const char* kSinglePromptMethod = "single-prompt";
inline constexpr const char* kMultiPromptMethod = "multi-prompt";

/// Frame-embedding spread with prompt consolidation (one encoding of the whole
/// story) against multi-prompt encoding ([P0; Pi] per frame).
inline DistanceReport single_vs_multi_report(std::span<const PromptSet> corpus, const TextEncoder& encoder,
                                             FramePooling pooling = FramePooling::Mean) {
    DistanceReport report;
    report.methods = {kSinglePromptMethod, kMultiPromptMethod};
    for (const auto& set : corpus) {
        set.validate();
        if (set.frame_count() < 2) {
            throw Error(ErrorKind::TooFewVectors, "set '" + set.id + "' has fewer than two frames");
        }
        const auto single = encoder.encode(set);
        std::vector<EmbeddingMatrix> multi;
        for (std::size_t i = 1; i <= set.frame_count(); ++i) {
            multi.push_back(encoder.encode(pair_prompt(set, i)));
        }

        SetDistances row{set.id, {}};
        if (pooling == FramePooling::Mean) {
            std::vector<Vector> single_features, multi_features;
            for (std::size_t i = 1; i <= set.frame_count(); ++i) {
                single_features.push_back(frame_span_features(single, i));
                multi_features.push_back(frame_span_features(multi[i - 1], 1));
            }
            row.distances = {pairwise_mean_distance(single_features), pairwise_mean_distance(multi_features)};
        } else {
            std::vector<Matrix> single_rows, multi_rows;
            for (std::size_t i = 1; i <= set.frame_count(); ++i) {
                single_rows.emplace_back(single.span_rows(single.layout.frame(i)));
                multi_rows.emplace_back(multi[i - 1].span_rows(multi[i - 1].layout.frame(1)));
            }
            row.distances = {pairwise_mean_token_distance(single_rows), pairwise_mean_token_distance(multi_rows)};
        }
        report.per_set.push_back(std::move(row));
    }
    detail::finalize_report(report);
    return report;
}

/// Frame features of one story produced by one method.
struct MethodFeatures {
    std::string method;
    std::string set_id;
    std::vector<Vector> frames;
};

/// Mean pairwise frame-feature distance per (set, method). Methods keep their
/// order of first appearance; every method must cover the same sets.
inline DistanceReport frame_feature_distance_report(std::span<const MethodFeatures> inputs) {
    DistanceReport report;
    std::vector<std::string> set_ids;
    for (const auto& in : inputs) {
        if (std::find(report.methods.begin(), report.methods.end(), in.method) == report.methods.end()) {
            report.methods.push_back(in.method);
        }
        if (std::find(set_ids.begin(), set_ids.end(), in.set_id) == set_ids.end()) {
            set_ids.push_back(in.set_id);
        }
    }
    for (const auto& id : set_ids) {
        SetDistances row{id, std::vector<double>(report.methods.size(), 0.0)};
        std::vector<bool> seen(report.methods.size(), false);
        for (const auto& in : inputs) {
            if (in.set_id != id) {
                continue;
            }
            const auto m = std::size_t(std::find(report.methods.begin(), report.methods.end(), in.method) -
                                       report.methods.begin());
            if (seen[m]) {
                throw Error(ErrorKind::InvalidArgument, "method '" + in.method + "' listed twice for set '" + id + "'");
            }
            seen[m] = true;
            try {
                row.distances[m] = pairwise_mean_distance(in.frames);
            } catch (const Error& e) {
                throw Error(e.kind(), "set '" + id + "', method '" + in.method + "': " + e.what());
            }
        }
        for (std::size_t m = 0; m < seen.size(); ++m) {
            if (!seen[m]) {
                throw Error(ErrorKind::InvalidArgument, "method '" + report.methods[m] + "' has no features for set '" +
                                                            id + "'");
            }
        }
        report.per_set.push_back(std::move(row));
    }
    detail::finalize_report(report);
    return report;
}

inline std::string format_distance(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", value);
    return buf;
}

/// Columns set_id, method, mean_pairwise_distance; sets in report order.
inline std::string report_to_csv(const DistanceReport& report) {
    std::string out = "set_id,method,mean_pairwise_distance\n";
    for (const auto& s : report.per_set) {
        for (std::size_t m = 0; m < report.methods.size(); ++m) {
            out += s.set_id + "," + report.methods[m] + "," + format_distance(s.distances[m]) + "\n";
        }
    }
    return out;
}

inline nlohmann::json report_to_json(const DistanceReport& report) {
    nlohmann::json means = nlohmann::json::object();
    for (std::size_t m = 0; m < report.methods.size(); ++m) {
        means[report.methods[m]] = report.method_means[m];
    }
    nlohmann::json ranking = nlohmann::json::array();
    for (auto m : report.ranking) {
        ranking.push_back(report.methods[m]);
    }
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& s : report.per_set) {
        nlohmann::json d = nlohmann::json::object();
        for (std::size_t m = 0; m < report.methods.size(); ++m) {
            d[report.methods[m]] = s.distances[m];
        }
        sets.push_back({{"set_id", s.set_id}, {"distances", d}});
    }
    nlohmann::json doc = {{"methods", report.methods}, {"method_means", means}, {"ranking", ranking},
                          {"sets", sets}};
    if (report.methods.size() >= 2) {
        doc["win_rate"] = report.win_rate;
        doc["win_rate_pair"] = {report.methods[0], report.methods[1]};
    }
    return doc;
}

}  // namespace onestory
