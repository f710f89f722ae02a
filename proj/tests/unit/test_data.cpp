#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "focusclf/cli/synth.hpp"
#include "focusclf/data/augment.hpp"
#include "focusclf/data/bundle.hpp"
#include "focusclf/data/folds.hpp"
#include "focusclf/data/manifest.hpp"
#include "focusclf/data/normalize.hpp"
#include "focusclf/data/patch.hpp"
#include "focusclf/data/volume.hpp"

namespace fs = std::filesystem;
using namespace focusclf;
using namespace focusclf::data;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("focusclf_test_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Volume ramp_volume(std::uint32_t d, std::uint32_t h, std::uint32_t w) {
  Volume v(d, h, w);
  for (std::size_t i = 0; i < v.size(); ++i) v.voxels[i] = static_cast<float>(i);
  return v;
}

LesionImage ramp_lesion(std::size_t h, std::size_t w, int cy, int cx, const std::string& id = "P-L1") {
  LesionImage l;
  l.record.patient_id = "P";
  l.record.lesion_id = id;
  l.record.label = Label::Benign;
  l.channels = {"T2W", "ADC"};
  for (int k = 0; k < 2; ++k) {
    Raster r{h, w, std::vector<float>(h * w)};
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) r.at(y, x) = static_cast<float>(k * 1000 + y * w + x);
    l.slices.push_back(r);
  }
  l.center_y = cy;
  l.center_x = cx;
  return l;
}

std::vector<LesionImage> cohort(std::size_t malignant, std::size_t benign) {
  std::vector<LesionImage> out;
  for (std::size_t i = 0; i < malignant + benign; ++i) {
    auto l = ramp_lesion(48, 48, 24, 24, "L" + std::to_string(i));
    l.record.label = i < malignant ? Label::Malignant : Label::Benign;
    out.push_back(l);
  }
  return out;
}

}  // namespace

TEST(Volume, RoundTripIsBitExact) {
  const Volume v = ramp_volume(2, 3, 4);
  EXPECT_EQ(decode_volume(encode_volume(v)), v);
  const auto dir = temp_dir("volume");
  write_volume(dir / "v.mpv", v);
  EXPECT_EQ(read_volume(dir / "v.mpv"), v);
}

TEST(Volume, HeaderLayout) {
  const auto bytes = encode_volume(Volume(1, 2, 3, 1.0f));
  ASSERT_EQ(bytes.size(), 16u + 6 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MPV1");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 3);
}

TEST(Volume, RejectsBadInput) {
  auto bytes = encode_volume(Volume(1, 2, 2));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_volume(bad_magic), FormatError);
  bytes.pop_back();
  EXPECT_THROW(decode_volume(bytes), FormatError);
  EXPECT_THROW(read_volume("/nonexistent/x.mpv"), IoError);
}

TEST(Manifest, ParsesAndFormatsRecords) {
  const std::string line =
      R"({"patient_id":"P1","lesion_id":"P1-L1","zone":"PZ","label":"malignant","center":[1,20,30],)"
      R"("modalities":{"T2W":"a.mpv","ADC":"b.mpv"}})";
  const LesionRecord r = parse_record(line);
  EXPECT_EQ(r.patient_id, "P1");
  EXPECT_EQ(r.zone, Zone::PZ);
  EXPECT_EQ(r.label, Label::Malignant);
  EXPECT_EQ((r.center), (std::array<int, 3>{1, 20, 30}));
  EXPECT_EQ(r.modalities.at("ADC"), "b.mpv");
  const LesionRecord back = parse_record(format_record(r));
  EXPECT_EQ(back.lesion_id, r.lesion_id);
  EXPECT_EQ(back.modalities, r.modalities);
  EXPECT_EQ(class_index(Label::Malignant), 1);
  EXPECT_EQ(class_index(Label::Benign), 0);
}

TEST(Manifest, RejectsMalformedLinesAndUnknownLabels) {
  EXPECT_THROW(parse_record("{not json"), InputError);
  EXPECT_THROW(parse_record(R"({"lesion_id":"x"})"), InputError);
  const auto dir = temp_dir("manifest");
  LesionRecord r;
  r.patient_id = "P";
  r.lesion_id = "P-L1";
  r.label = Label::Unknown;
  r.modalities = {{"T2W", "v.mpv"}};
  write_manifest(dir / "m.jsonl", {r});
  EXPECT_THROW(load_manifest(dir / "m.jsonl"), InputError);
  EXPECT_EQ(load_manifest(dir / "m.jsonl", true).records.size(), 1u);
}

TEST(Normalize, PercentileMatchesLinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 0.5), 2.5);
  std::vector<float> v;
  for (int i = 1; i <= 100; ++i) v.push_back(static_cast<float>(i));
  EXPECT_NEAR(percentile(v, 0.99), 99.01, 1e-9);
  EXPECT_DOUBLE_EQ(percentile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile(v, 1.0), 100.0);
}

TEST(Normalize, ClipsT2wOutliersThenScalesToUnitRange) {
  Volume t2(1, 25, 40);
  for (std::size_t i = 0; i < 1000; ++i) t2.voxels[i] = static_cast<float>(i);
  t2.voxels[999] = 1e6f;
  Volume adc = t2;
  const auto n = normalize_case({{"T2W", t2}, {"ADC", adc}});
  const auto& nt = n.volumes.at("T2W");
  const auto& na = n.volumes.at("ADC");
  EXPECT_FLOAT_EQ(*std::min_element(nt.voxels.begin(), nt.voxels.end()), 0.0f);
  EXPECT_FLOAT_EQ(*std::max_element(nt.voxels.begin(), nt.voxels.end()), 1.0f);
  // Without clipping the outlier would squash every other voxel near zero.
  EXPECT_NEAR(nt.voxels[500], 500.0 / percentile(t2.voxels, 0.99), 1e-6);
  EXPECT_FLOAT_EQ(nt.voxels[999], 1.0f);
  EXPECT_LT(na.voxels[500], 1e-3f);
  EXPECT_FLOAT_EQ(na.voxels[999], 1.0f);
}

TEST(Normalize, ConstantVolumeBecomesZero) {
  const auto n = normalize_case({{"ADC", Volume(1, 4, 4, 3.0f)}});
  EXPECT_TRUE(n.constant_modalities.count("ADC"));
  for (float v : n.volumes.at("ADC").voxels) EXPECT_EQ(v, 0.0f);
}

TEST(Patch, WindowShiftsInsideTheImage) {
  const Window centred = patch_window(64, 64, 32, 32, 32);
  EXPECT_EQ(centred.y0, 16);
  EXPECT_EQ(centred.x0, 16);
  EXPECT_TRUE(centred.fits);
  const Window corner = patch_window(64, 64, 3, 62, 32);
  EXPECT_EQ(corner.y0, 0);
  EXPECT_EQ(corner.x0, 32);
  EXPECT_FALSE(patch_window(20, 64, 10, 10, 32).fits);
}

TEST(Patch, ExtractCopiesTheWindow) {
  const auto l = ramp_lesion(64, 64, 30, 40);
  const Patch p = extract_patch(l, 32);
  ASSERT_EQ(p.data.shape(), (Shape{32, 32, 2}));
  EXPECT_FALSE(p.provenance.rotated);
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j)
      for (std::size_t k = 0; k < 2; ++k)
        ASSERT_EQ(p.data[(i * 32 + j) * 2 + k], l.slices[k].at(14 + i, 24 + j));
}

TEST(Patch, CropReflectsAtTheBorder) {
  Raster r{3, 3, {0, 1, 2, 3, 4, 5, 6, 7, 8}};
  const Raster c = crop_reflect(r, -1, -1, 5, 5);
  EXPECT_EQ(c.at(1, 1), 0);
  EXPECT_EQ(c.at(0, 0), r.at(1, 1));
  EXPECT_EQ(c.at(4, 4), r.at(1, 1));
  EXPECT_EQ(c.at(0, 2), r.at(1, 1));
}

TEST(Patch, SmallImagesArePadded) {
  const auto l = ramp_lesion(20, 20, 10, 10);
  const Patch p = extract_patch(l, 32);
  EXPECT_EQ(p.data.shape(), (Shape{32, 32, 2}));
  EXPECT_TRUE(p.data.all_finite());
}

TEST(Patch, RotationByZeroAndFullTurnIsIdentity) {
  const auto l = ramp_lesion(64, 64, 32, 32);
  const Patch ref = extract_patch(l, 32);
  for (double angle : {0.0, 360.0, -360.0}) {
    const Patch r = rotate_patch(l, 32, angle);
    EXPECT_TRUE(r.provenance.rotated);
    for (std::size_t i = 0; i < ref.data.size(); ++i) ASSERT_NEAR(r.data[i], ref.data[i], 1e-3) << angle;
  }
}

TEST(Patch, QuarterTurnsPermutePixels) {
  const auto l = ramp_lesion(64, 64, 32, 32);
  const Patch ref = extract_patch(l, 32);
  const Patch r90 = rotate_patch(l, 32, 90.0);
  const Patch r180 = rotate_patch(l, 32, 180.0);
  const std::size_t s = 32;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j)
      for (std::size_t k = 0; k < 2; ++k) {
        ASSERT_NEAR(r90.data[(i * s + j) * 2 + k], ref.data[(j * s + (s - 1 - i)) * 2 + k], 1e-3);
        ASSERT_NEAR(r180.data[(i * s + j) * 2 + k], ref.data[((s - 1 - i) * s + (s - 1 - j)) * 2 + k], 1e-3);
      }
}

TEST(Patch, RotationPreservesConstantImages) {
  auto l = ramp_lesion(64, 64, 32, 32);
  for (auto& s : l.slices) std::fill(s.values.begin(), s.values.end(), 0.25f);
  for (double angle : {17.0, -123.0, 45.0}) {
    const Patch r = rotate_patch(l, 32, angle);
    for (float v : r.data.data()) ASSERT_NEAR(v, 0.25f, 1e-6);
  }
}

TEST(Augment, CountsPerPolicy) {
  const auto lesions = cohort(80, 240);
  Rng rng(1);
  const auto p2 = augment(lesions, 32, AugmentPolicy::Policy2, rng);
  std::size_t mal = 0;
  for (const auto& p : p2) mal += p.record.label == Label::Malignant;
  EXPECT_EQ(mal, 1600u);
  EXPECT_EQ(p2.size() - mal, 1440u);
  const auto p1 = augment(lesions, 32, AugmentPolicy::Policy1, rng);
  mal = 0;
  for (const auto& p : p1) mal += p.record.label == Label::Malignant;
  EXPECT_EQ(mal, 320u);
  EXPECT_EQ(p1.size() - mal, 240u);
  EXPECT_EQ(augment(lesions, 32, AugmentPolicy::None, rng).size(), 320u);
}

TEST(Augment, Policy1UsesFixedSmallAngles) {
  const auto lesions = cohort(1, 1);
  const auto p = augment_policy1(lesions, 32);
  std::vector<double> angles;
  for (const auto& x : p)
    if (x.provenance.rotated) angles.push_back(x.provenance.angle_deg);
  EXPECT_EQ(angles, (std::vector<double>{2.0, 4.0, 6.0}));
}

TEST(Augment, Policy2AnglesAreInRangeAndSeeded) {
  Rng a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const double x = random_angle(a);
    EXPECT_GT(x, -180.0);
    EXPECT_LE(x, 180.0);
    EXPECT_EQ(x, random_angle(b));
  }
}

TEST(Folds, StratifiedAndDisjoint) {
  std::vector<LesionRecord> records;
  for (int i = 0; i < 320; ++i) {
    LesionRecord r;
    r.lesion_id = "L" + std::to_string(i);
    r.label = i < 80 ? Label::Malignant : Label::Benign;
    records.push_back(r);
  }
  Rng rng(7);
  const auto split = stratified_folds(records, 10, rng);
  std::set<std::string> seen;
  for (std::size_t k = 0; k < 10; ++k) {
    const auto members = split.members(k);
    std::size_t mal = 0;
    for (const auto& id : members) {
      EXPECT_TRUE(seen.insert(id).second);
      mal += std::stoi(id.substr(1)) < 80;
    }
    EXPECT_EQ(mal, 8u);
    EXPECT_EQ(members.size(), 32u);
  }
  EXPECT_EQ(seen.size(), 320u);
  Rng again(7);
  EXPECT_EQ(stratified_folds(records, 10, again).assignment, split.assignment);
}

TEST(Folds, TooFewLesionsPerClassIsAnError) {
  std::vector<LesionRecord> records(5);
  for (std::size_t i = 0; i < 5; ++i) {
    records[i].lesion_id = std::to_string(i);
    records[i].label = i == 0 ? Label::Malignant : Label::Benign;
  }
  Rng rng(1);
  EXPECT_THROW(stratified_folds(records, 2, rng), InputError);
}

TEST(Folds, LeakageGuard) {
  const auto lesions = cohort(2, 2);
  Rng rng(3);
  const auto all = augment(lesions, 32, AugmentPolicy::Policy2, rng);
  std::vector<Patch> train, val;
  for (const auto& p : all) (p.record.lesion_id == "L0" ? val : train).push_back(p);
  EXPECT_NO_THROW(check_no_leakage(train, val));
  train.push_back(val.front());
  EXPECT_THROW(check_no_leakage(train, val), StateError);
}

TEST(Bundle, RoundTrip) {
  const auto lesions = cohort(1, 1);
  Rng rng(2);
  const auto patches = augment(lesions, 32, AugmentPolicy::Policy1, rng);
  const auto dir = temp_dir("bundle");
  write_patch_bundle(dir, patches);
  const auto back = read_patch_bundle(dir);
  ASSERT_EQ(back.size(), patches.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].data, patches[i].data);
    EXPECT_EQ(back[i].record.lesion_id, patches[i].record.lesion_id);
    EXPECT_EQ(back[i].provenance, patches[i].provenance);
  }
}

TEST(Synth, GeneratedCohortLoadsBack) {
  cli::SynthOptions o;
  o.lesions = 20;
  o.seed = 11;
  const auto dir = temp_dir("synth");
  const auto m = cli::synth_generate(o, dir);
  EXPECT_EQ(count_label(m.records, Label::Malignant), 5u);
  const auto loaded = load_manifest(dir / "manifest.jsonl");
  const auto lesions = load_lesions(loaded, {"T2W", "ADC", "DWI_b50"});
  const auto direct = cli::synth_lesion_images(o, {"T2W", "ADC", "DWI_b50"});
  ASSERT_EQ(lesions.size(), direct.size());
  for (std::size_t i = 0; i < lesions.size(); ++i) {
    EXPECT_EQ(extract_patch(lesions[i], 32).data, extract_patch(direct[i], 32).data);
  }
  EXPECT_THROW(load_lesions(loaded, {"Ktrans"}), InputError);
}
