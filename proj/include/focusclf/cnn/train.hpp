#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "focusclf/cnn/checkpoint.hpp"
#include "focusclf/data/augment.hpp"
#include "focusclf/data/folds.hpp"
#include "focusclf/data/patch.hpp"
#include "focusclf/eval/metrics.hpp"
#include "focusclf/rng.hpp"

namespace focusclf::cnn {

/// Stacks patches (selected by `indices`, or all) into an N×S×S×C batch.
TensorF stack_patches(std::span<const data::Patch> patches, std::span<const std::size_t> indices);
TensorF stack_patches(std::span<const data::Patch> patches);
std::vector<int> patch_labels(std::span<const data::Patch> patches);

/// Softmax class probabilities (benign, malignant) per patch, BN in infer mode.
std::vector<std::array<double, 2>> predict(const ModelParamsF& params, std::span<const data::Patch> patches,
                                           std::size_t batch_size = 64);
std::array<double, 2> predict(const ModelParamsF& params, const data::Patch& patch);

/// Trains from a fresh model built with `rng`. Keeps the snapshot with the best
/// validation accuracy (earliest epoch on ties).
Checkpoint train_fold(std::span<const data::Patch> train, std::span<const data::Patch> validation,
                      const ModelConfig& config, Rng& rng);

/// Optional progress hook: (fold, epoch record).
using EpochCallback = std::function<void(std::size_t, const EpochRecord&)>;

struct CvOptions {
  std::size_t folds = 10;
  data::AugmentPolicy policy = data::AugmentPolicy::Policy1;
  std::size_t jobs = 1;
  /// Fraction of training lesions per fold whose label is flipped before
  /// augmentation; validation labels are never touched.
  double train_label_noise = 0.0;
  /// Restrict training to these fold indices (empty = all).
  std::vector<std::size_t> only_folds;
  EpochCallback on_epoch;
};

struct FoldResult {
  std::size_t fold = 0;
  Checkpoint checkpoint;
  eval::MetricsReport metrics;
  std::vector<std::string> val_ids;
  std::vector<int> val_labels;
  std::vector<double> val_scores;  // malignant probability
  std::size_t train_patches = 0;
  double seconds = 0.0;
};

struct CvResult {
  data::FoldSplit split;
  std::vector<FoldResult> folds;
  eval::MetricsReport average;
};

/// Splits lesions into stratified folds and trains one model per fold on
/// augmented training lesions, validating on the unaugmented held-out lesions.
CvResult cross_validate(std::span<const data::LesionImage> lesions, const ModelConfig& config, const CvOptions& options);

/// Fold split used by cross_validate for a given seed (shared with wELM and sweeps).
data::FoldSplit cv_split(std::span<const data::LesionImage> lesions, std::size_t k, std::uint64_t seed);

/// Labels flipped per fold when `train_label_noise` > 0: a deterministic
/// function of the seed, fold and noise level.
std::vector<data::LesionImage> noisy_training_lesions(std::vector<data::LesionImage> train, double fraction,
                                                      std::uint64_t seed, std::size_t fold);

/// The training patches a fold sees (augmented, possibly label-noised).
std::vector<data::Patch> fold_training_patches(std::span<const data::LesionImage> train, std::size_t size,
                                               const CvOptions& options, std::uint64_t seed, std::size_t fold);

}  // namespace focusclf::cnn
