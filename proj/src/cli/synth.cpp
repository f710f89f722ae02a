#include "focusclf/cli/synth.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numbers>

#include "focusclf/data/normalize.hpp"
#include "focusclf/errors.hpp"

namespace focusclf::cli {

using data::Label;

namespace {

// Typical raw intensity level per modality slot.
constexpr double kBase[] = {400.0, 1200.0, 300.0};

// Multiplicative blob contrast per modality slot: value·(1 + c·g).
std::array<double, 3> contrast(Label label, bool first_channel_only) {
  if (first_channel_only) {
    return label == Label::Malignant ? std::array{-0.5, -0.4, 0.6} : std::array{0.4, -0.4, 0.6};
  }
  return label == Label::Malignant ? std::array{-0.2, -0.5, 0.8} : std::array{-0.45, 0.0, 0.0};
}

}  // namespace

void SynthOptions::validate() const {
  if (lesions < 20) throw ConfigError("synth needs at least 20 lesions");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("synth ratio must lie strictly between 0 and 1");
  if (modalities.empty()) throw ConfigError("synth needs at least one modality");
  if (depth == 0 || height < 16 || width < 16) throw ConfigError("synth volumes must be at least 1x16x16");
  if (malignant_count() == 0 || malignant_count() == lesions) throw ConfigError("synth ratio leaves a class empty");
}

std::size_t SynthOptions::malignant_count() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(lesions) * ratio));
}

std::vector<Label> synth_labels(const SynthOptions& options) {
  options.validate();
  std::vector<Label> labels(options.lesions, Label::Benign);
  std::fill_n(labels.begin(), options.malignant_count(), Label::Malignant);
  Rng rng = Rng(options.seed).substream("synth-labels");
  rng.shuffle(labels);
  return labels;
}

SynthCase synth_case(const SynthOptions& o, std::size_t index, Label label) {
  Rng rng = Rng(o.seed).substream("synth").substream("case" + std::to_string(index));
  SynthCase c;
  auto& r = c.record;
  r.patient_id = fmt::format("SYN-{:04d}", index);
  r.lesion_id = r.patient_id + "-L1";
  r.zone = rng.uniform() < 0.7 ? data::Zone::PZ : data::Zone::CG;
  r.label = label;
  const auto d = static_cast<std::uint32_t>(o.depth), h = static_cast<std::uint32_t>(o.height),
             w = static_cast<std::uint32_t>(o.width);
  const int cz = static_cast<int>(o.depth / 2);
  const int margin_y = static_cast<int>(o.height / 4), margin_x = static_cast<int>(o.width / 4);
  const int cy = margin_y + static_cast<int>(rng.below(static_cast<std::uint32_t>(o.height - 2 * margin_y)));
  const int cx = margin_x + static_cast<int>(rng.below(static_cast<std::uint32_t>(o.width - 2 * margin_x)));
  r.center = {cz, cy, cx};
  const double radius = rng.uniform(2.5, 5.0);
  const double amplitude = rng.uniform(0.7, 1.0);
  const auto gains = contrast(label, o.first_channel_only);

  c.blob_mask = data::Raster{o.height, o.width, std::vector<float>(o.height * o.width)};
  for (std::size_t y = 0; y < o.height; ++y)
    for (std::size_t x = 0; x < o.width; ++x) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      c.blob_mask.at(y, x) = dy * dy + dx * dx <= 2.0 * radius * radius * std::log(2.0) ? 1.0f : 0.0f;
    }

  const bool outlier = rng.uniform() < o.outlier_fraction;
  for (std::size_t m = 0; m < o.modalities.size(); ++m) {
    const std::size_t slot = m % 3;
    const double base = kBase[slot] * rng.uniform(0.8, 1.2);
    const double fy = rng.uniform(0.05, 0.2), fx = rng.uniform(0.05, 0.2);
    const double py = rng.uniform(0.0, 2 * std::numbers::pi), px = rng.uniform(0.0, 2 * std::numbers::pi);
    const double gain = gains[slot] * amplitude;
    data::Volume v(d, h, w);
    for (std::size_t z = 0; z < o.depth; ++z)
      for (std::size_t y = 0; y < o.height; ++y)
        for (std::size_t x = 0; x < o.width; ++x) {
          const double dz = static_cast<double>(z) - cz, dy = static_cast<double>(y) - cy,
                       dx = static_cast<double>(x) - cx;
          const double g = std::exp(-(dy * dy + dx * dx) / (2 * radius * radius) - dz * dz / 2.0);
          const double texture = 1.0 + 0.15 * std::sin(fy * y + py) * std::cos(fx * x + px);
          const double value = base * texture * (1.0 + gain * g) + base * o.noise * rng.normal();
          v.at(z, y, x) = static_cast<float>(std::max(0.0, value));
        }
    if (outlier && data::is_t2w(o.modalities[m])) {
      for (int k = 0; k < 4; ++k) {
        v.at(rng.below(d), rng.below(h), rng.below(w)) = static_cast<float>(base * 8.0);
      }
    }
    c.volumes.emplace(o.modalities[m], std::move(v));
  }
  for (const auto& name : o.modalities) r.modalities[name] = "volumes/" + r.patient_id + "_" + name + ".mpv";
  return c;
}

std::vector<SynthCase> synth_cases(const SynthOptions& options) {
  const auto labels = synth_labels(options);
  std::vector<SynthCase> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out.push_back(synth_case(options, i, labels[i]));
  return out;
}

std::vector<data::LesionImage> synth_lesion_images(const SynthOptions& options, const std::vector<std::string>& channels) {
  const auto labels = synth_labels(options);
  std::vector<data::LesionImage> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = synth_case(options, i, labels[i]);
    out.push_back(data::slice_lesion(data::normalize_case(c.volumes).volumes, c.record, channels));
  }
  return out;
}

data::Manifest synth_generate(const SynthOptions& options, const std::filesystem::path& out) {
  const auto labels = synth_labels(options);
  std::filesystem::create_directories(out / "volumes");
  data::Manifest manifest;
  manifest.directory = out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto c = synth_case(options, i, labels[i]);
    for (const auto& [name, v] : c.volumes) data::write_volume(out / c.record.modalities.at(name), v);
    manifest.records.push_back(std::move(c.record));
  }
  data::write_manifest(out / "manifest.jsonl", manifest.records);
  return manifest;
}

}  // namespace focusclf::cli
