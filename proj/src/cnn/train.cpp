#include "focusclf/cnn/train.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "focusclf/errors.hpp"

namespace focusclf::cnn {

namespace nm = focusclf::numerics;

TensorF stack_patches(std::span<const data::Patch> patches, std::span<const std::size_t> indices) {
  if (indices.empty()) throw InputError("cannot build an empty batch");
  const auto& first = patches[indices[0]];
  const std::size_t s = first.size, c = first.channels.size(), per = s * s * c;
  TensorF batch({indices.size(), s, s, c});
  float* out = batch.ptr();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& p = patches[indices[i]];
    if (p.data.size() != per) {
      throw ShapeError("patch " + p.record.lesion_id + " has shape " + shape_string(p.data.shape()) +
                       ", batch expects " + shape_string({s, s, c}));
    }
    std::copy(p.data.ptr(), p.data.ptr() + per, out + i * per);
  }
  return batch;
}

TensorF stack_patches(std::span<const data::Patch> patches) {
  std::vector<std::size_t> all(patches.size());
  std::iota(all.begin(), all.end(), 0);
  return stack_patches(patches, all);
}

std::vector<int> patch_labels(std::span<const data::Patch> patches) {
  std::vector<int> labels;
  labels.reserve(patches.size());
  for (const auto& p : patches) labels.push_back(data::class_index(p.record.label));
  return labels;
}

std::vector<std::array<double, 2>> predict(const ModelParamsF& params, std::span<const data::Patch> patches,
                                           std::size_t batch_size) {
  std::vector<std::array<double, 2>> out;
  out.reserve(patches.size());
  const std::size_t expected = params.conv[0].weight.extent(2);
  for (std::size_t start = 0; start < patches.size(); start += batch_size) {
    const std::size_t end = std::min(patches.size(), start + batch_size);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    for (std::size_t i : idx) {
      if (patches[i].channels.size() != expected) {
        throw InputError("patch " + patches[i].record.lesion_id + " has " + std::to_string(patches[i].channels.size()) +
                         " channels, model expects " + std::to_string(expected));
      }
    }
    const TensorF logits = forward(params, stack_patches(patches, idx), Mode::Infer);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double l0 = logits[2 * i], l1 = logits[2 * i + 1];
      const double m = std::max(l0, l1);
      const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
      out.push_back({e0 / (e0 + e1), e1 / (e0 + e1)});
    }
  }
  return out;
}

std::array<double, 2> predict(const ModelParamsF& params, const data::Patch& patch) {
  return predict(params, std::span<const data::Patch>(&patch, 1))[0];
}

namespace {

std::vector<double> malignant_scores(const ModelParamsF& params, std::span<const data::Patch> patches) {
  std::vector<double> scores;
  for (const auto& p : predict(params, patches)) scores.push_back(p[1]);
  return scores;
}

double accuracy_of(const ModelParamsF& params, std::span<const data::Patch> patches, std::span<const int> labels) {
  const auto scores = malignant_scores(params, patches);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] > 0.5 ? 1 : 0) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

}  // namespace

Checkpoint train_fold(std::span<const data::Patch> train, std::span<const data::Patch> validation,
                      const ModelConfig& config, Rng& rng) {
  config.validate();
  if (train.empty() && config.epochs > 0) throw InputError("train_fold: no training patches");
  Checkpoint ck;
  ck.config = config;
  ModelParamsF params = build_model(config, rng);
  Rng shuffle = rng.substream("shuffle");
  nm::AdamState<float> adam{config.adam, 0, {}, {}};
  const std::vector<int> train_labels = patch_labels(train);
  const std::vector<int> val_labels = patch_labels(validation);
  const bool has_val = !validation.empty();

  TrainLog& log = ck.log;
  if (has_val) log.initial_val_accuracy = accuracy_of(params, validation, val_labels);
  ModelParamsF best = params;
  double best_acc = -1.0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<int> labels;
      for (std::size_t i : idx) labels.push_back(train_labels[i]);
      ForwardCache<float> cache;
      const TensorF logits = forward(params, stack_patches(train, idx), Mode::Train, &cache);
      const auto loss = nm::softmax_xent_batch(logits, labels);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch index " +
                           std::to_string(batches));
      }
      ModelParamsF grads = backward(params, cache, loss.grad);
      std::vector<TensorF*> ps;
      std::vector<const TensorF*> gs;
      for (auto& [name, t] : params.trainable()) ps.push_back(t);
      for (auto& [name, t] : grads.trainable()) gs.push_back(t);
      try {
        nm::adam_step<float>(ps, gs, adam);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch index " +
                           std::to_string(batches) + ")");
      }
      update_bn_stats(params, cache);
      loss_sum += loss.loss;
      ++batches;
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1)), eval::kNaN};
    if (has_val) rec.val_accuracy = accuracy_of(params, validation, val_labels);
    log.epochs.push_back(rec);
    if (!has_val || rec.val_accuracy > best_acc) {
      best = params;
      best_acc = has_val ? rec.val_accuracy : best_acc;
      log.best_epoch = epoch;
    }
    if (has_val && config.stop_at_perfect_validation && rec.val_accuracy >= 1.0) {
      log.stopped_early = epoch < config.epochs;
      break;
    }
  }
  if (log.best_epoch == 0) best_acc = log.initial_val_accuracy;
  log.best_val_accuracy = has_val ? best_acc : eval::kNaN;
  if (has_val) log.best_val = eval::evaluate_scores(malignant_scores(best, validation), val_labels);
  ck.params = std::move(best);
  ck.adam = std::move(adam);
  return ck;
}

data::FoldSplit cv_split(std::span<const data::LesionImage> lesions, std::size_t k, std::uint64_t seed) {
  std::vector<data::LesionRecord> records;
  for (const auto& l : lesions) records.push_back(l.record);
  Rng rng = Rng(seed).substream("folds");
  return data::stratified_folds(records, k, rng);
}

std::vector<data::LesionImage> noisy_training_lesions(std::vector<data::LesionImage> train, double fraction,
                                                      std::uint64_t seed, std::size_t fold) {
  if (fraction < 0.0 || fraction > 1.0) throw ConfigError("label noise fraction must lie in [0, 1]");
  const auto flips = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train.size())));
  if (flips == 0) return train;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).substream("label-noise").substream("fold" + std::to_string(fold));
  rng.shuffle(order);
  for (std::size_t i = 0; i < flips; ++i) {
    auto& label = train[order[i]].record.label;
    label = label == data::Label::Malignant ? data::Label::Benign : data::Label::Malignant;
  }
  return train;
}

std::vector<data::Patch> fold_training_patches(std::span<const data::LesionImage> train, std::size_t size,
                                               const CvOptions& options, std::uint64_t seed, std::size_t fold) {
  const auto lesions = noisy_training_lesions({train.begin(), train.end()}, options.train_label_noise, seed, fold);
  Rng aug = Rng(seed).substream("augmentation").substream("fold" + std::to_string(fold));
  return data::augment(lesions, size, options.policy, aug);
}

CvResult cross_validate(std::span<const data::LesionImage> lesions, const ModelConfig& config, const CvOptions& options) {
  config.validate();
  CvResult result;
  result.split = cv_split(lesions, options.folds, config.seed);

  std::vector<std::size_t> todo = options.only_folds;
  if (todo.empty()) {
    todo.resize(options.folds);
    std::iota(todo.begin(), todo.end(), 0);
  }
  for (std::size_t f : todo) {
    if (f >= options.folds) throw ConfigError("fold index " + std::to_string(f) + " out of range");
  }
  result.folds.resize(todo.size());

  auto run_fold = [&](std::size_t slot) {
    const std::size_t fold = todo[slot];
    const auto start = std::chrono::steady_clock::now();
    auto [train_lesions, val_lesions] = data::split_by_fold<data::LesionImage>(
        lesions, result.split, fold, [](const data::LesionImage& l) -> const data::LesionRecord& { return l.record; });
    const auto train = fold_training_patches(train_lesions, config.input_size, options, config.seed, fold);
    const auto val = data::original_patches(val_lesions, config.input_size);
    data::check_no_leakage(train, val);

    ModelConfig fold_config = config;
    Rng rng = Rng(config.seed).substream("fold" + std::to_string(fold));
    FoldResult& r = result.folds[slot];
    r.fold = fold;
    r.train_patches = train.size();
    r.checkpoint = train_fold(train, val, fold_config, rng);
    r.val_labels = patch_labels(val);
    for (const auto& p : val) r.val_ids.push_back(p.record.lesion_id);
    r.val_scores = malignant_scores(r.checkpoint.params, val);
    r.metrics = eval::evaluate_scores(r.val_scores, r.val_labels);
    r.metrics.fold = static_cast<int>(fold);
    if (options.on_epoch) {
      for (const auto& e : r.checkpoint.log.epochs) options.on_epoch(fold, e);
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, todo.size()));
  if (jobs == 1) {
    for (std::size_t slot = 0; slot < todo.size(); ++slot) run_fold(slot);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(todo.size());
    std::vector<std::thread> workers;
    for (std::size_t j = 0; j < jobs; ++j) {
      workers.emplace_back([&] {
        for (std::size_t slot; (slot = next.fetch_add(1)) < todo.size();) {
          try {
            run_fold(slot);
          } catch (...) {
            errors[slot] = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<eval::MetricsReport> reports;
  for (const auto& r : result.folds) reports.push_back(r.metrics);
  result.average = eval::average_reports(reports);
  return result;
}

}  // namespace focusclf::cnn
