#include "focusclf/data/augment.hpp"

#include "focusclf/errors.hpp"

namespace focusclf::data {

std::string to_string(AugmentPolicy policy) {
  switch (policy) {
    case AugmentPolicy::None: return "none";
    case AugmentPolicy::Policy1: return "policy1";
    case AugmentPolicy::Policy2: return "policy2";
  }
  return "none";
}

AugmentPolicy parse_policy(const std::string& text) {
  if (text == "none" || text == "0") return AugmentPolicy::None;
  if (text == "policy1" || text == "1") return AugmentPolicy::Policy1;
  if (text == "policy2" || text == "2") return AugmentPolicy::Policy2;
  throw ConfigError("unknown augmentation policy '" + text + "' (expected none, policy1, policy2)");
}

std::vector<Patch> original_patches(std::span<const LesionImage> lesions, std::size_t size) {
  std::vector<Patch> out;
  out.reserve(lesions.size());
  for (const auto& l : lesions) out.push_back(extract_patch(l, size));
  return out;
}

std::vector<Patch> augment_policy1(std::span<const LesionImage> lesions, std::size_t size) {
  std::vector<Patch> out;
  for (const auto& l : lesions) {
    out.push_back(extract_patch(l, size));
    if (l.record.label == Label::Malignant) {
      for (double angle : kPolicy1Angles) out.push_back(rotate_patch(l, size, angle));
    }
  }
  return out;
}

double random_angle(Rng& rng) {
  // uniform() is in [0,1), so this lands in (-180, 180].
  return 180.0 - 360.0 * rng.uniform();
}

std::vector<Patch> augment_policy2(std::span<const LesionImage> lesions, std::size_t size, Rng& rng) {
  std::vector<Patch> out;
  for (const auto& l : lesions) {
    out.push_back(extract_patch(l, size));
    const int n = l.record.label == Label::Malignant ? kPolicy2MalignantRotations : kPolicy2BenignRotations;
    for (int i = 0; i < n; ++i) out.push_back(rotate_patch(l, size, random_angle(rng)));
  }
  return out;
}

std::vector<Patch> augment(std::span<const LesionImage> lesions, std::size_t size, AugmentPolicy policy, Rng& rng) {
  switch (policy) {
    case AugmentPolicy::None: return original_patches(lesions, size);
    case AugmentPolicy::Policy1: return augment_policy1(lesions, size);
    case AugmentPolicy::Policy2: return augment_policy2(lesions, size, rng);
  }
  return {};
}

}  // namespace focusclf::data
