#include <chrono>
#include <cmath>
#include <filesystem>
#include <thread>

#include <gtest/gtest.h>

#include "loyalty/errors.hpp"
#include "loyalty/metrics/loyalty.hpp"
#include "loyalty/metrics/speedup.hpp"
#include "loyalty/rng.hpp"
#include "support/fixtures.hpp"

using namespace loyalty;
using namespace loyalty::metrics;
using nn::ProbVector;
using namespace loyalty::testing;

namespace {

PredictionSet make_set(const std::vector<std::vector<double>>& rows, const std::string& tag) {
    std::vector<std::string> ids;
    std::vector<ProbVector> probs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ids.push_back("ex" + std::to_string(i));
        probs.emplace_back(rows[i]);
    }
    return PredictionSet::from_probs(ids, probs, tag, "test");
}

PredictionSet one_hot_set(const std::vector<std::size_t>& labels, std::size_t k = 3) {
    std::vector<std::vector<double>> rows;
    for (auto l : labels) {
        std::vector<double> r(k, 0.0);
        r[l] = 1.0;
        rows.push_back(r);
    }
    return make_set(rows, "onehot");
}

PredictionSet random_set(Rng& rng, std::size_t n, std::size_t k) {
    std::vector<std::string> ids;
    std::vector<ProbVector> probs;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back("ex" + std::to_string(i));
        probs.push_back(random_dist(rng, k, true));
    }
    return PredictionSet::from_probs(ids, probs, "random", "test");
}

}  // namespace

TEST(Divergence, KlWorkedExample) {
    const ProbVector p({0.5, 0.5});
    const ProbVector q({0.25, 0.75});
    // mpmath at 30 digits.
    EXPECT_NEAR(kl_divergence(p, q), 0.20751874963942190927, 1e-15);
    EXPECT_NEAR(kl_divergence(q, p), 0.18872187554086713609, 1e-15);
    EXPECT_NE(kl_divergence(p, q), kl_divergence(q, p));
    EXPECT_EQ(kl_divergence(p, p), 0.0);
    EXPECT_NEAR(kl_divergence(p, q, LogBase::natural), 0.20751874963942190927 * std::log(2.0), 1e-15);
}

TEST(Divergence, JsWorkedExamples) {
    EXPECT_DOUBLE_EQ(js_divergence(ProbVector({1.0, 0.0}), ProbVector({0.0, 1.0})), 1.0);
    EXPECT_EQ(js_divergence(ProbVector({0.3, 0.7}), ProbVector({0.3, 0.7})), 0.0);
    const ProbVector p({0.5, 0.5});
    const ProbVector q({0.25, 0.75});
    EXPECT_NEAR(js_divergence(p, q), 0.0487949406953985325810503565691, 1e-15);
    EXPECT_NEAR(pair_probability_loyalty(p, q), 0.77910423115098258500764988488, 1e-15);
}

TEST(Divergence, DimensionMismatchThrows) {
    EXPECT_THROW(kl_divergence(ProbVector({1.0}), ProbVector({0.5, 0.5})), InvalidInput);
    EXPECT_THROW(js_divergence(ProbVector({1.0}), ProbVector({0.5, 0.5})), InvalidInput);
}

TEST(Divergence, KlSmoothsZerosInQ) {
    const double kl = kl_divergence(ProbVector({0.5, 0.5}), ProbVector({1.0, 0.0}));
    EXPECT_TRUE(std::isfinite(kl));
    EXPECT_GT(kl, 15.0);
}

TEST(Divergence, MatchesBruteForceOracle) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng = make_rng(42, "oracle");
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t dim = 2 + uniform_index(rng, 9);
        const ProbVector p = random_dist(rng, dim, true);
        const ProbVector q = random_dist(rng, dim, false);
        ASSERT_NEAR(kl_divergence(p, q), static_cast<double>(oracle_kl(p, q)), 1e-10) << trial;
        const ProbVector r = random_dist(rng, dim, true);
        ASSERT_NEAR(js_divergence(p, r), static_cast<double>(oracle_js(p, r)), 1e-10) << trial;
        ASSERT_EQ(js_divergence(p, r), js_divergence(r, p));
    }
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
}

TEST(Loyalty, LabelLoyaltyExamples) {
    EXPECT_DOUBLE_EQ(label_loyalty(one_hot_set({0, 1, 1, 2}), one_hot_set({0, 1, 2, 2})), 75.0);
    EXPECT_DOUBLE_EQ(label_loyalty(one_hot_set({0, 0}), one_hot_set({1, 1})), 0.0);
}

TEST(Loyalty, ProbabilityLoyaltyExamples) {
    EXPECT_EQ(probability_loyalty(one_hot_set({0, 1}, 2), one_hot_set({1, 0}, 2)), 0.0);
    const auto half = make_set({{0.5, 0.5}}, "h");
    EXPECT_EQ(probability_loyalty(half, half), 100.0);
}

TEST(Loyalty, IdentitiesAndSymmetry) {
    Rng rng = make_rng(7, "pairs");
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t n = 1 + uniform_index(rng, 4);
        const std::size_t k = 2 + uniform_index(rng, 4);
        const auto a = random_set(rng, n, k);
        const auto b = random_set(rng, n, k);
        ASSERT_EQ(label_loyalty(a, a), 100.0);
        ASSERT_EQ(probability_loyalty(a, a), 100.0);
        ASSERT_EQ(label_loyalty(a, b), label_loyalty(b, a));
        ASSERT_EQ(probability_loyalty(a, b), probability_loyalty(b, a));
        for (double lp : probability_loyalty_per_example(a, b)) {
            ASSERT_GE(lp, 0.0);
            ASSERT_LE(lp, 1.0);
        }
        ASSERT_EQ(label_loyalty(a, b), accuracy(b, a.labels));
    }
}

TEST(Loyalty, MisalignedSetsNameFirstMismatch) {
    auto a = one_hot_set({0, 1, 2});
    auto b = one_hot_set({0, 1, 2});
    b.ids[1] = "other";
    try {
        label_loyalty(a, b);
        FAIL();
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("ex1"), std::string::npos);
    }
    EXPECT_THROW(probability_loyalty(a, one_hot_set({0, 1})), InvalidInput);
}

TEST(Loyalty, AccuracyExamples) {
    const auto s = one_hot_set({0, 1});
    const std::vector<std::size_t> same{0, 1};
    const std::vector<std::size_t> swapped{1, 0};
    EXPECT_EQ(accuracy(s, same), 100.0);
    EXPECT_EQ(accuracy(s, swapped), 0.0);
    const std::vector<std::size_t> short_gold{0};
    EXPECT_THROW(accuracy(s, short_gold), InvalidInput);
}

TEST(Loyalty, ReportSummaryAndJson) {
    const auto t = make_set({{0.5, 0.5}, {0.9, 0.1}, {0.2, 0.8}}, "t");
    const auto s = make_set({{0.5, 0.5}, {0.6, 0.4}, {0.7, 0.3}}, "s");
    const std::vector<std::size_t> gold{0, 0, 1};
    const auto r = loyalty_report(t, s, gold);
    EXPECT_EQ(r.n_examples, 3u);
    EXPECT_EQ(r.lp_max, 1.0);
    EXPECT_LE(r.lp_min, r.lp_median);
    EXPECT_NEAR(r.label_loyalty, 200.0 / 3.0, 1e-12);
    EXPECT_NEAR(r.accuracy, 200.0 / 3.0, 1e-12);
    EXPECT_EQ(loyalty_report_from_json(to_json(r)), r);
}

TEST(PredictionSetIo, JsonlRoundTrip) {
    Rng rng = make_rng(3, "io");
    auto set = random_set(rng, 20, 3);
    set.provenance = "teacher";
    const auto path = std::filesystem::temp_directory_path() / "loyalty_preds.jsonl";
    write_jsonl(set, path);
    EXPECT_EQ(read_jsonl(path), set);
    std::filesystem::remove(path);
}

TEST(PredictionSetIo, LabelMustBeArgmax) {
    auto set = make_set({{0.2, 0.8}}, "x");
    set.labels[0] = 0;
    EXPECT_THROW(set.validate(), InvalidInput);
}

TEST(Speedup, IdenticalWorkloadsNearOne) {
    auto work = [] {
        volatile double x = 0.0;
        for (int i = 0; i < 20000; ++i) x = x + std::sqrt(static_cast<double>(i));
    };
    const auto r = measure_speedup(work, work);
    EXPECT_NEAR(r.ratio, 1.0, 0.1);
    EXPECT_EQ(r.reference.seconds.size(), 30u);
    EXPECT_EQ(r.candidate.seconds.size(), 30u);
    EXPECT_GE(r.reference.variance, 0.0);
}

TEST(Speedup, HalfTheWorkIsFaster) {
    auto work = [](int n) {
        return [n] {
            volatile double x = 0.0;
            for (int i = 0; i < n; ++i) x = x + std::sqrt(static_cast<double>(i));
        };
    };
    const auto r = measure_speedup(work(40000), work(20000));
    EXPECT_GT(r.ratio, 1.3);
}

TEST(Speedup, FlagsUnstableTiming) {
    int calls = 0;
    auto jittery = [&calls] {
        std::this_thread::sleep_for(std::chrono::microseconds(calls++ % 2 == 0 ? 100 : 3000));
    };
    auto steady = [] { std::this_thread::sleep_for(std::chrono::microseconds(500)); };
    const auto r = measure_speedup(jittery, steady, TimingOptions{0, 30, 0.2});
    ASSERT_FALSE(r.warnings.empty());
    EXPECT_NE(r.warnings.front().find("UnstableTiming"), std::string::npos);
}

TEST(Speedup, RejectsTooFewRuns) {
    EXPECT_THROW(measure_speedup([] {}, [] {}, TimingOptions{5, 10, 0.2}), InvalidInput);
}
