#include "focusclf/data/volume.hpp"

#include <fstream>
#include <iterator>

#include "focusclf/data/binary.hpp"

namespace focusclf::data {

namespace {
constexpr char kMagic[4] = {'M', 'P', 'V', '1'};
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

std::vector<std::uint8_t> encode_volume(const Volume& volume) {
  if (volume.voxels.size() != static_cast<std::size_t>(volume.depth) * volume.height * volume.width) {
    throw ShapeError("encode_volume: voxel count does not match extents");
  }
  ByteWriter w;
  w.put_string(std::string(kMagic, 4));
  w.put_u32(volume.depth);
  w.put_u32(volume.height);
  w.put_u32(volume.width);
  w.put_f32s(volume.voxels);
  return std::move(w.bytes());
}

Volume decode_volume(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  ByteReader r(bytes, origin);
  if (r.get_string(4) != std::string(kMagic, 4)) throw FormatError(origin + ": bad magic, expected MPV1");
  Volume v;
  v.depth = r.get_u32();
  v.height = r.get_u32();
  v.width = r.get_u32();
  const std::size_t count = static_cast<std::size_t>(v.depth) * v.height * v.width;
  if (r.remaining() != count * 4) {
    throw FormatError(origin + ": payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                      std::to_string(count * 4));
  }
  v.voxels.resize(count);
  r.get_f32s(v.voxels);
  return v;
}

Volume read_volume(const std::filesystem::path& path) { return decode_volume(read_file_bytes(path.string()), path.string()); }

void write_volume(const std::filesystem::path& path, const Volume& volume) { write_file_bytes(path.string(), encode_volume(volume)); }

}  // namespace focusclf::data
