#include "raterfuse/folds.hpp"

#include <map>
#include <ostream>

#include <fmt/format.h>

#include "raterfuse/csv.hpp"
#include "raterfuse/errors.hpp"
#include "raterfuse/rng.hpp"

namespace raterfuse {

std::vector<FoldAssignment> stratified_kfold(const std::vector<StratifiedEntry>& entries, int k, std::uint64_t seed) {
    if (k < 2) throw Error(fmt::format("stratified_kfold: k must be >= 2, got {}", k));
    if (entries.empty()) throw Error("stratified_kfold: empty input");

    std::map<int, std::size_t> sizes;
    for (const auto& e : entries) ++sizes[e.stratum];

    // Ordered map keeps stratum processing order independent of input order;
    // the rare pool sorts before every real stratum.
    constexpr long long kRarePool = static_cast<long long>(INT32_MIN) - 1;
    std::map<long long, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const int s = entries[i].stratum;
        const long long key = sizes[s] < static_cast<std::size_t>(k) ? kRarePool : s;
        strata[key].push_back(i);
    }

    Rng rng(seed);
    std::vector<FoldAssignment> out(entries.size());
    std::size_t dealt = 0;
    for (auto& [key, members] : strata) {
        rng.shuffle(members);
        for (std::size_t idx : members) {
            out[idx] = FoldAssignment{entries[idx].image_id, static_cast<int>(dealt % static_cast<std::size_t>(k))};
            ++dealt;
        }
    }
    return out;
}

std::unordered_map<std::string, int> fold_lookup(const std::vector<FoldAssignment>& folds) {
    std::unordered_map<std::string, int> m;
    m.reserve(folds.size());
    for (const auto& f : folds) m.emplace(f.image_id, f.fold);
    return m;
}

void write_folds_csv(std::ostream& out, const std::vector<FoldAssignment>& folds) {
    out << "image_id,fold\n";
    for (const auto& f : folds) out << csv::escape(f.image_id) << ',' << f.fold << '\n';
}

}  // namespace raterfuse
