#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace raterfuse {

struct FoldAssignment {
    std::string image_id;
    int fold = 0;

    friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

struct StratifiedEntry {
    std::string image_id;
    int stratum = 0;
};

// Within each stratum ids are shuffled by the seeded generator and dealt
// round-robin; the deal continues across strata so overall fold sizes also
// differ by at most one. Strata with fewer than k members share one pool.
// Output follows input order. Throws Error for k < 2 or empty input.
std::vector<FoldAssignment> stratified_kfold(const std::vector<StratifiedEntry>& entries, int k, std::uint64_t seed);

std::unordered_map<std::string, int> fold_lookup(const std::vector<FoldAssignment>& folds);

// image_id,fold
void write_folds_csv(std::ostream& out, const std::vector<FoldAssignment>& folds);

}  // namespace raterfuse
