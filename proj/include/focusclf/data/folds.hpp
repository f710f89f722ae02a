#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "focusclf/data/manifest.hpp"
#include "focusclf/data/patch.hpp"
#include "focusclf/rng.hpp"

namespace focusclf::data {

struct FoldSplit {
  std::size_t k = 0;
  std::map<std::string, std::size_t> assignment;  // lesion_id -> fold

  std::size_t fold_of(const std::string& lesion_id) const;
  std::vector<std::string> members(std::size_t fold) const;
};

/// Shuffles each class and deals it round-robin over k folds, so per-class
/// counts differ by at most one across folds. Requires k lesions per class.
FoldSplit stratified_folds(std::span<const LesionRecord> records, std::size_t k, Rng& rng);

template <typename Item, typename GetRecord>
std::pair<std::vector<Item>, std::vector<Item>> split_by_fold(std::span<const Item> items, const FoldSplit& split,
                                                              std::size_t validation_fold, GetRecord get) {
  std::pair<std::vector<Item>, std::vector<Item>> out;
  for (const auto& item : items) {
    if (split.fold_of(get(item).lesion_id) == validation_fold) {
      out.second.push_back(item);
    } else {
      out.first.push_back(item);
    }
  }
  return out;
}

/// Throws StateError if any lesion contributes patches to both sets.
void check_no_leakage(std::span<const Patch> train, std::span<const Patch> validation);

}  // namespace focusclf::data
