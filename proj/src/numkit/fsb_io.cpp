#include "fsb/numkit/fsb_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "fsb/error.hpp"

namespace fsb::numkit {
namespace {

static_assert(sizeof(float) == 4);

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw IoError("FSB1: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_fsb1(const Array& a) {
  std::vector<std::uint8_t> out{'F', 'S', 'B', '1'};
  out.reserve(8 + 4 * a.rank() + 4 * a.size());
  put_u32(out, static_cast<std::uint32_t>(a.rank()));
  for (std::size_t d : a.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (float f : a.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

Array decode_fsb1(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "FSB1", 4) != 0) throw IoError("FSB1: bad magic");
  std::size_t pos = 4;
  const std::uint32_t rank = get_u32(bytes, pos);
  Shape shape(rank);
  for (auto& d : shape) d = get_u32(bytes, pos);
  const std::size_t n = shape_product(shape);
  if (bytes.size() != pos + 4 * n) throw IoError("FSB1: payload size does not match shape " + shape_string(shape));
  std::vector<float> data(n);
  for (auto& f : data) f = std::bit_cast<float>(get_u32(bytes, pos));
  return Array(std::move(shape), std::move(data));
}

void write_fsb1(const std::filesystem::path& path, const Array& a) {
  const auto bytes = encode_fsb1(a);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

Array read_fsb1(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_fsb1(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

const Array& ArrayBundle::get(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw IoError("bundle has no array named '" + name + "'");
  return it->second;
}

void save_bundle(const std::filesystem::path& dir, const ArrayBundle& bundle) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  nlohmann::json manifest;
  manifest["format"] = "FSB1";
  manifest["meta"] = nlohmann::json::parse(bundle.meta_json);
  auto& entries = manifest["arrays"];
  entries = nlohmann::json::object();
  for (const auto& [name, arr] : bundle.arrays) {
    const std::string file = name + ".fsb";
    write_fsb1(dir / file, arr);
    entries[name] = {{"file", file}, {"shape", arr.shape()}};
  }
  std::ofstream f(dir / "manifest.json");
  if (!f) throw IoError("cannot write " + (dir / "manifest.json").string());
  f << manifest.dump(2) << '\n';
}

ArrayBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw IoError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "manifest.json").string() + ": " + e.what());
  }
  ArrayBundle bundle;
  bundle.meta_json = manifest.value("meta", nlohmann::json::object()).dump();
  for (const auto& [name, entry] : manifest.at("arrays").items()) {
    Array a = read_fsb1(dir / entry.at("file").get<std::string>());
    if (entry.contains("shape") && entry["shape"].get<Shape>() != a.shape()) {
      throw IoError("manifest shape mismatch for '" + name + "' in " + dir.string());
    }
    bundle.arrays.emplace(name, std::move(a));
  }
  return bundle;
}

}  // namespace fsb::numkit
