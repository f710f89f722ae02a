#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "focusclf/cnn/checkpoint.hpp"
#include "focusclf/data/patch.hpp"
#include "focusclf/data/volume.hpp"
#include "focusclf/rng.hpp"

namespace focusclf::saliency {

/// Conv stack of a trained network, global max pooling over the last conv
/// maps, and a dense K×2 head.
struct CamHead {
  cnn::ModelConfig config;
  cnn::ModelParamsF stack;  // only the conv blocks are used
  TensorF weights;          // K×2
  TensorF bias;             // 2
};

CamHead build_cam_head(const cnn::Checkpoint& checkpoint, Rng& rng);

struct GlobalMaxPool {
  TensorF pooled;                  // N×K
  std::vector<std::size_t> argmax; // flat index into the N×h×w×K maps
};
GlobalMaxPool global_max_pool(const TensorF& maps);

/// Last conv maps (N×h×w×K) for any spatial size, BN in infer mode.
TensorF last_conv_maps(const CamHead& head, const TensorF& batch);

/// Head logits from pooled features.
TensorF head_logits(const CamHead& head, const TensorF& pooled);
/// Whole-network logits (conv stack → pool → head).
TensorF cam_forward(const CamHead& head, const TensorF& batch);

struct CamTrainOptions {
  int max_epochs = 50;
  std::size_t batch_size = 32;
  numerics::AdamHyper adam;
  bool full_finetune = false;  // also update the conv stack
  double tolerance = 1e-4;     // converged when |loss[e] − loss[e−window]| < tolerance
  int window = 5;
};

struct CamTrainLog {
  std::vector<double> losses;
  bool converged = false;
  double train_accuracy = 0.0;
};

CamHead finetune_cam(CamHead head, std::span<const data::Patch> train, const CamTrainOptions& options, Rng& rng,
                     CamTrainLog* log = nullptr);

struct CamMap {
  int class_index = 1;
  TensorD raw;        // h×w at last-conv resolution
  TensorD upsampled;  // S×S, min-max normalized to [0,1]
  double raw_min = 0.0;
  double raw_max = 0.0;
};

/// Σ_k V[k, class]·F_k over the last conv maps, bilinearly upsampled to the patch size.
CamMap compute_cam(const CamHead& head, const data::Patch& patch, int class_index = 1);

/// Bilinear resize with half-pixel centres.
TensorD upsample_bilinear(const TensorD& map, std::size_t out_h, std::size_t out_w);

/// Binary PPM: first channel as gray, CAM as red overlay with α = 0.5.
std::vector<std::uint8_t> overlay_ppm(const TensorD& cam01, const data::Patch& patch);
void export_overlay(const CamMap& cam, const data::Patch& patch, const std::filesystem::path& path);

/// Raw CAM as a D=1 volume.
data::Volume raw_cam_volume(const CamMap& cam);

cnn::Container to_container(const CamHead& head);
CamHead cam_head_from_container(const cnn::Container& container);
void save_cam_head(const std::filesystem::path& path, const CamHead& head);
CamHead load_cam_head(const std::filesystem::path& path);

}  // namespace focusclf::saliency
