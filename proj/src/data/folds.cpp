#include "focusclf/data/folds.hpp"

#include <algorithm>
#include <set>

#include "focusclf/errors.hpp"

namespace focusclf::data {

std::size_t FoldSplit::fold_of(const std::string& lesion_id) const {
  auto it = assignment.find(lesion_id);
  if (it == assignment.end()) throw InputError("lesion " + lesion_id + " is not part of the fold split");
  return it->second;
}

std::vector<std::string> FoldSplit::members(std::size_t fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignment)
    if (f == fold) out.push_back(id);
  return out;
}

FoldSplit stratified_folds(std::span<const LesionRecord> records, std::size_t k, Rng& rng) {
  if (k == 0) throw ConfigError("stratified_folds: k must be positive");
  std::vector<std::string> malignant, benign;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.lesion_id).second) throw InputError("stratified_folds: duplicate lesion id " + r.lesion_id);
    if (r.label == Label::Malignant) {
      malignant.push_back(r.lesion_id);
    } else if (r.label == Label::Benign) {
      benign.push_back(r.lesion_id);
    } else {
      throw InputError("stratified_folds: lesion " + r.lesion_id + " has no label");
    }
  }
  if (malignant.size() < k || benign.size() < k) {
    throw ConfigError("stratified_folds: need at least " + std::to_string(k) + " lesions per class, have " +
                      std::to_string(malignant.size()) + " malignant and " + std::to_string(benign.size()) + " benign");
  }
  // Sorting first makes the split independent of manifest order.
  std::sort(malignant.begin(), malignant.end());
  std::sort(benign.begin(), benign.end());
  rng.shuffle(malignant);
  rng.shuffle(benign);

  FoldSplit split;
  split.k = k;
  for (std::size_t i = 0; i < malignant.size(); ++i) split.assignment[malignant[i]] = i % k;
  // Continue dealing where the malignant pass stopped to even out fold sizes.
  const std::size_t offset = malignant.size() % k;
  for (std::size_t i = 0; i < benign.size(); ++i) split.assignment[benign[i]] = (offset + i) % k;
  return split;
}

void check_no_leakage(std::span<const Patch> train, std::span<const Patch> validation) {
  std::set<std::string> held_out;
  for (const auto& p : validation) held_out.insert(p.record.lesion_id);
  for (const auto& p : train) {
    if (held_out.count(p.record.lesion_id)) {
      throw StateError("leakage: lesion " + p.record.lesion_id + " has patches in both training and validation sets");
    }
  }
}

}  // namespace focusclf::data
