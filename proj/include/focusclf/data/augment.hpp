#pragma once

#include <span>
#include <string>
#include <vector>

#include "focusclf/data/patch.hpp"
#include "focusclf/rng.hpp"

namespace focusclf::data {

enum class AugmentPolicy { None, Policy1, Policy2 };

std::string to_string(AugmentPolicy policy);
AugmentPolicy parse_policy(const std::string& text);

/// Fixed angles for malignant lesions under policy 1.
inline constexpr double kPolicy1Angles[] = {2.0, 4.0, 6.0};
/// Extra random rotations per lesion under policy 2.
inline constexpr int kPolicy2BenignRotations = 5;
inline constexpr int kPolicy2MalignantRotations = 19;

/// One unrotated patch per lesion (validation/test data is never augmented).
std::vector<Patch> original_patches(std::span<const LesionImage> lesions, std::size_t size);

/// Benign: original only. Malignant: original + rotations at 2°, 4°, 6°.
std::vector<Patch> augment_policy1(std::span<const LesionImage> lesions, std::size_t size);

/// Benign: original + 5 rotations; malignant: original + 19 rotations; angles
/// uniform on (-180°, 180°].
std::vector<Patch> augment_policy2(std::span<const LesionImage> lesions, std::size_t size, Rng& rng);

/// Draws one policy-2 angle.
double random_angle(Rng& rng);

std::vector<Patch> augment(std::span<const LesionImage> lesions, std::size_t size, AugmentPolicy policy, Rng& rng);

}  // namespace focusclf::data
