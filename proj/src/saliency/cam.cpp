#include "focusclf/saliency/cam.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "focusclf/cnn/train.hpp"
#include "focusclf/data/binary.hpp"
#include "focusclf/errors.hpp"
#include "focusclf/numerics/init.hpp"

namespace focusclf::saliency {

namespace nm = focusclf::numerics;

CamHead build_cam_head(const cnn::Checkpoint& checkpoint, Rng& rng) {
  const auto& last = checkpoint.params.conv[3].weight;
  if (last.rank() != 4) throw FormatError("checkpoint has no last conv layer");
  CamHead head;
  head.config = checkpoint.config;
  head.stack = checkpoint.params;
  const std::size_t k = last.extent(3);
  Rng init = rng.substream("cam-head");
  head.weights = nm::glorot_uniform(init, k, 2);
  head.bias = TensorF({2});
  return head;
}

GlobalMaxPool global_max_pool(const TensorF& maps) {
  if (maps.rank() != 4) throw ShapeError("global max pool expects N×h×w×K maps, got " + shape_string(maps.shape()));
  const std::size_t n = maps.extent(0), hw = maps.extent(1) * maps.extent(2), k = maps.extent(3);
  GlobalMaxPool out{TensorF({n, k}), std::vector<std::size_t>(n * k)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t best = (i * hw) * k + c;
      for (std::size_t p = 1; p < hw; ++p) {
        const std::size_t idx = (i * hw + p) * k + c;
        if (maps[idx] > maps[best]) best = idx;
      }
      out.pooled[i * k + c] = maps[best];
      out.argmax[i * k + c] = best;
    }
  return out;
}

TensorF last_conv_maps(const CamHead& head, const TensorF& batch) {
  return cnn::conv_stack_forward(head.stack, batch, cnn::Mode::Infer);
}

TensorF head_logits(const CamHead& head, const TensorF& pooled) { return nm::dense(pooled, head.weights, head.bias); }

TensorF cam_forward(const CamHead& head, const TensorF& batch) {
  return head_logits(head, global_max_pool(last_conv_maps(head, batch)).pooled);
}

namespace {

TensorF rows_of(const TensorF& m, std::span<const std::size_t> idx) {
  const std::size_t k = m.extent(1);
  TensorF out({idx.size(), k});
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(m.ptr() + idx[i] * k, k, out.ptr() + i * k);
  return out;
}

}  // namespace

CamHead finetune_cam(CamHead head, std::span<const data::Patch> train, const CamTrainOptions& options, Rng& rng,
                     CamTrainLog* log) {
  CamTrainLog local;
  CamTrainLog& lg = log ? *log : local;
  lg = CamTrainLog{};
  if (train.empty()) throw InputError("CAM fine-tuning needs training patches");
  const std::vector<int> labels = cnn::patch_labels(train);
  Rng shuffle = rng.substream("cam-shuffle");
  nm::AdamState<float> adam{options.adam, 0, {}, {}};
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  // Frozen stack: pooled features never change, so compute them once.
  TensorF pooled_all;
  if (!options.full_finetune) {
    const std::size_t k = head.weights.extent(0);
    pooled_all = TensorF({train.size(), k});
    for (std::size_t start = 0; start < train.size(); start += 64) {
      const std::size_t end = std::min(train.size(), start + 64);
      std::vector<std::size_t> idx(end - start);
      std::iota(idx.begin(), idx.end(), start);
      const TensorF p = global_max_pool(last_conv_maps(head, cnn::stack_patches(train, idx))).pooled;
      std::copy(p.data().begin(), p.data().end(), pooled_all.ptr() + start * k);
    }
  }

  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    shuffle.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<int> y;
      for (std::size_t i : idx) y.push_back(labels[i]);
      std::vector<TensorF*> ps{&head.weights, &head.bias};
      std::vector<const TensorF*> gs;
      if (!options.full_finetune) {
        const TensorF x = rows_of(pooled_all, idx);
        const auto loss = nm::softmax_xent_batch(head_logits(head, x), y);
        if (!std::isfinite(loss.loss)) throw NumericError("non-finite CAM head loss at epoch " + std::to_string(epoch));
        const auto g = nm::dense_backward(x, head.weights, loss.grad);
        gs = {&g.weights, &g.bias};
        nm::adam_step<float>(ps, gs, adam);
        loss_sum += loss.loss;
      } else {
        cnn::ForwardCache<float> cache;
        const TensorF maps = cnn::conv_stack_forward(head.stack, cnn::stack_patches(train, idx), cnn::Mode::Train, &cache);
        const GlobalMaxPool pool = global_max_pool(maps);
        const auto loss = nm::softmax_xent_batch(head_logits(head, pool.pooled), y);
        if (!std::isfinite(loss.loss)) throw NumericError("non-finite CAM loss at epoch " + std::to_string(epoch));
        const auto g = nm::dense_backward(pool.pooled, head.weights, loss.grad);
        TensorF grad_maps(maps.shape());
        for (std::size_t i = 0; i < pool.argmax.size(); ++i) grad_maps[pool.argmax[i]] += g.input[i];
        cnn::ModelParamsF grads = head.stack.zeros_like();
        cnn::conv_stack_backward(head.stack, cache, std::move(grad_maps), grads);
        for (std::size_t l = 0; l < 4; ++l) {
          ps.insert(ps.end(), {&head.stack.conv[l].weight, &head.stack.conv[l].bias, &head.stack.conv[l].bn.scale,
                               &head.stack.conv[l].bn.shift});
        }
        gs = {&g.weights, &g.bias};
        for (std::size_t l = 0; l < 4; ++l) {
          gs.insert(gs.end(), {&grads.conv[l].weight, &grads.conv[l].bias, &grads.conv[l].bn.scale,
                               &grads.conv[l].bn.shift});
        }
        nm::adam_step<float>(ps, gs, adam);
        cnn::update_bn_stats(head.stack, cache);
        loss_sum += loss.loss;
      }
      ++batches;
    }
    lg.losses.push_back(loss_sum / static_cast<double>(batches));
    const std::size_t e = lg.losses.size();
    if (static_cast<int>(e) > options.window &&
        std::abs(lg.losses[e - 1] - lg.losses[e - 1 - static_cast<std::size_t>(options.window)]) < options.tolerance) {
      lg.converged = true;
      break;
    }
  }

  std::size_t correct = 0;
  for (std::size_t start = 0; start < train.size(); start += 64) {
    const std::size_t end = std::min(train.size(), start + 64);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const TensorF logits = cam_forward(head, cnn::stack_patches(train, idx));
    for (std::size_t i = 0; i < idx.size(); ++i) correct += (logits[2 * i + 1] > logits[2 * i] ? 1 : 0) == labels[idx[i]];
  }
  lg.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
  return head;
}

TensorD upsample_bilinear(const TensorD& map, std::size_t out_h, std::size_t out_w) {
  const std::size_t h = map.extent(0), w = map.extent(1);
  TensorD out({out_h, out_w});
  auto source = [](std::size_t i, std::size_t in, std::size_t out_n) {
    const double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(out_n) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = source(y, h, out_h);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = source(x, w, out_w);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = (1 - fx) * map[y0 * w + x0] + fx * map[y0 * w + x1];
      const double bottom = (1 - fx) * map[y1 * w + x0] + fx * map[y1 * w + x1];
      out[y * out_w + x] = (1 - fy) * top + fy * bottom;
    }
  }
  return out;
}

CamMap compute_cam(const CamHead& head, const data::Patch& patch, int class_index) {
  if (class_index != 0 && class_index != 1) throw InputError("CAM class index must be 0 or 1");
  if (patch.size < head.config.input_size) {
    throw InputError("CAM patch size " + std::to_string(patch.size) + " is smaller than the training size " +
                     std::to_string(head.config.input_size));
  }
  const TensorF maps = last_conv_maps(head, cnn::stack_patches(std::span<const data::Patch>(&patch, 1)));
  const std::size_t h = maps.extent(1), w = maps.extent(2), k = maps.extent(3);
  if (head.weights.extent(0) != k) throw ShapeError("CAM head width does not match the last conv layer");
  CamMap cam;
  cam.class_index = class_index;
  cam.raw = TensorD({h, w});
  for (std::size_t p = 0; p < h * w; ++p) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      s += static_cast<double>(head.weights[c * 2 + static_cast<std::size_t>(class_index)]) * maps[p * k + c];
    }
    cam.raw[p] = s;
  }
  const auto [lo, hi] = std::minmax_element(cam.raw.data().begin(), cam.raw.data().end());
  cam.raw_min = *lo;
  cam.raw_max = *hi;
  cam.upsampled = upsample_bilinear(cam.raw, patch.size, patch.size);
  const double range = cam.raw_max - cam.raw_min;
  for (double& v : cam.upsampled.data()) v = range > 0.0 ? std::clamp((v - cam.raw_min) / range, 0.0, 1.0) : 0.0;
  return cam;
}

std::vector<std::uint8_t> overlay_ppm(const TensorD& cam01, const data::Patch& patch) {
  const std::size_t s = patch.size, c = patch.channels.size();
  if (cam01.rank() != 2 || cam01.extent(0) != s || cam01.extent(1) != s) {
    throw ShapeError("overlay: CAM shape " + shape_string(cam01.shape()) + " does not match patch size " +
                     std::to_string(s));
  }
  const std::string header = "P6\n" + std::to_string(s) + " " + std::to_string(s) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + 3 * s * s);
  auto byte = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); };
  for (std::size_t i = 0; i < s * s; ++i) {
    const double g = std::round(std::clamp(static_cast<double>(patch.data[i * c]), 0.0, 1.0) * 255.0);
    const double a = 0.5 * std::clamp(cam01[i], 0.0, 1.0);
    out.push_back(byte((1 - a) * g + a * 255.0));
    out.push_back(byte((1 - a) * g));
    out.push_back(byte((1 - a) * g));
  }
  return out;
}

void export_overlay(const CamMap& cam, const data::Patch& patch, const std::filesystem::path& path) {
  const auto bytes = overlay_ppm(cam.upsampled, patch);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write overlay " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing overlay " + path.string());
}

data::Volume raw_cam_volume(const CamMap& cam) {
  data::Volume v(1, static_cast<std::uint32_t>(cam.raw.extent(0)), static_cast<std::uint32_t>(cam.raw.extent(1)));
  for (std::size_t i = 0; i < cam.raw.size(); ++i) v.voxels[i] = static_cast<float>(cam.raw[i]);
  return v;
}

cnn::Container to_container(const CamHead& head) {
  cnn::Container c;
  c.kind = "CAMH";
  c.config = nlohmann::json{{"model", cnn::to_json(head.config)}};
  for (const auto& [name, t] : head.stack.all_tensors()) {
    if (name.rfind("c", 0) == 0 || name.rfind("bn", 0) == 0) c.tensors.emplace_back(name, *t);
  }
  c.tensors.emplace_back("cam.weight", head.weights);
  c.tensors.emplace_back("cam.bias", head.bias);
  return c;
}

CamHead cam_head_from_container(const cnn::Container& c) {
  if (c.kind != "CAMH") throw FormatError("expected a CAMH record, found " + c.kind);
  if (!c.config.contains("model")) throw FormatError("CAM head config block lacks the model section");
  CamHead head;
  head.config = cnn::model_config_from_json(c.config.at("model"));
  head.config.validate();
  Rng unused(0);
  head.stack = cnn::build_model(head.config, unused);
  for (auto& [name, t] : head.stack.all_tensors()) {
    if (name.rfind("c", 0) != 0 && name.rfind("bn", 0) != 0) continue;
    const TensorF& stored = c.tensor(name);
    if (stored.shape() != t->shape()) throw FormatError("tensor " + name + " has an unexpected shape");
    *t = stored;
  }
  head.weights = c.tensor("cam.weight");
  head.bias = c.tensor("cam.bias");
  if (head.weights.rank() != 2 || head.weights.extent(0) != head.config.conv_widths[3] || head.weights.extent(1) != 2) {
    throw FormatError("CAM head weights have shape " + shape_string(head.weights.shape()));
  }
  return head;
}

void save_cam_head(const std::filesystem::path& path, const CamHead& head) { cnn::write_container(path, to_container(head)); }

CamHead load_cam_head(const std::filesystem::path& path) {
  return cam_head_from_container(cnn::read_container(path, "CAMH"));
}

}  // namespace focusclf::saliency
