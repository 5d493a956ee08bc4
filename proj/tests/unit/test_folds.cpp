#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "raterfuse/errors.hpp"
#include "raterfuse/folds.hpp"
#include "raterfuse/rng.hpp"

using namespace raterfuse;

namespace {

std::vector<StratifiedEntry> make_entries(std::size_t positives, std::size_t negatives) {
    std::vector<StratifiedEntry> out;
    for (std::size_t i = 0; i < positives + negatives; ++i)
        out.push_back({fmt::format("id{:04}", i), i < positives ? 1 : 0});
    return out;
}

}  // namespace

TEST(StratifiedKfold, EqualFoldsSingleStratum) {
    const auto folds = stratified_kfold(make_entries(0, 10), 5, 1);
    std::map<int, int> sizes;
    for (const auto& f : folds) sizes[f.fold]++;
    ASSERT_EQ(sizes.size(), 5u);
    for (const auto& [fold, n] : sizes) EXPECT_EQ(n, 2) << "fold " << fold;
}

TEST(StratifiedKfold, DeterministicForSeed) {
    const auto entries = make_entries(37, 91);
    EXPECT_EQ(stratified_kfold(entries, 5, 42), stratified_kfold(entries, 5, 42));
    EXPECT_NE(stratified_kfold(entries, 5, 42), stratified_kfold(entries, 5, 43));
}

TEST(StratifiedKfold, SeventyThirtySplit) {
    const auto entries = make_entries(30, 70);
    const auto folds = stratified_kfold(entries, 5, 9);
    std::map<int, std::pair<int, int>> counts;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        ASSERT_EQ(folds[i].image_id, entries[i].image_id);
        auto& c = counts[folds[i].fold];
        (entries[i].stratum ? c.first : c.second)++;
    }
    for (const auto& [fold, c] : counts) {
        EXPECT_EQ(c.first, 6) << fold;
        EXPECT_EQ(c.second, 14) << fold;
    }
}

TEST(StratifiedKfold, PartitionAndBalanceOnRandomInputs) {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(6));
        const std::size_t n = static_cast<std::size_t>(k) + rng.below(300);
        std::vector<StratifiedEntry> entries;
        for (std::size_t i = 0; i < n; ++i)
            entries.push_back({fmt::format("e{}", i), static_cast<int>(rng.below(4))});
        const auto folds = stratified_kfold(entries, k, rng.below(1000));
        ASSERT_EQ(folds.size(), n);
        std::set<std::string> ids;
        std::map<int, std::map<int, int>> per_stratum;
        std::map<int, std::size_t> stratum_size;
        std::map<int, int> fold_size;
        for (std::size_t i = 0; i < n; ++i) {
            ASSERT_GE(folds[i].fold, 0);
            ASSERT_LT(folds[i].fold, k);
            ids.insert(folds[i].image_id);
            stratum_size[entries[i].stratum]++;
            fold_size[folds[i].fold]++;
        }
        EXPECT_EQ(ids.size(), n);
        int lo = INT32_MAX, hi = 0;
        for (int f = 0; f < k; ++f) {
            lo = std::min(lo, fold_size[f]);
            hi = std::max(hi, fold_size[f]);
        }
        EXPECT_LE(hi - lo, 1);
        // Strata large enough to stand alone are balanced to within one.
        for (std::size_t i = 0; i < n; ++i) per_stratum[entries[i].stratum][folds[i].fold]++;
        for (const auto& [s, size] : stratum_size) {
            if (size < static_cast<std::size_t>(k)) continue;
            int slo = INT32_MAX, shi = 0;
            for (int f = 0; f < k; ++f) {
                slo = std::min(slo, per_stratum[s][f]);
                shi = std::max(shi, per_stratum[s][f]);
            }
            EXPECT_LE(shi - slo, 1) << "stratum " << s;
        }
    }
}

TEST(StratifiedKfold, RareStrataPooled) {
    auto entries = make_entries(0, 20);
    entries.push_back({"rare1", 7});
    entries.push_back({"rare2", 8});
    const auto folds = stratified_kfold(entries, 5, 3);
    EXPECT_EQ(folds.size(), 22u);
    EXPECT_NE(folds[20].fold, folds[21].fold);
}

TEST(StratifiedKfold, Errors) {
    EXPECT_THROW(stratified_kfold(make_entries(3, 3), 1, 0), Error);
    EXPECT_THROW(stratified_kfold({}, 5, 0), Error);
}

TEST(FoldsCsv, Layout) {
    std::ostringstream out;
    write_folds_csv(out, {{"a", 0}, {"b", 3}});
    EXPECT_EQ(out.str(), "image_id,fold\na,0\nb,3\n");
    const auto lookup = fold_lookup({{"a", 0}, {"b", 3}});
    EXPECT_EQ(lookup.at("b"), 3);
}

TEST(RngTest, KnownStreamsAreStable) {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.uniform(), b.uniform());
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
}

TEST(RngTest, DrawRanges) {
    Rng rng(5);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(rng.below(7), 7u);
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.05);
    EXPECT_NEAR(sq / n, 1.0, 0.05);
}
