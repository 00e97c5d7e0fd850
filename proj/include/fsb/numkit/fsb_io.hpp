#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fsb/numkit/array.hpp"

namespace fsb::numkit {

// FSB1 layout: "FSB1", u32 LE rank, rank x u32 LE dims, row-major f32 LE payload.
std::vector<std::uint8_t> encode_fsb1(const Array& a);
Array decode_fsb1(const std::vector<std::uint8_t>& bytes);

void write_fsb1(const std::filesystem::path& path, const Array& a);
Array read_fsb1(const std::filesystem::path& path);

// A named set of arrays stored as a directory: manifest.json listing
// {name: {file, shape}} plus one FSB1 file per array. `meta` is an arbitrary
// JSON object (as text) carried alongside.
struct ArrayBundle {
  std::map<std::string, Array> arrays;
  std::string meta_json = "{}";

  const Array& get(const std::string& name) const;
  void put(const std::string& name, Array a) { arrays.insert_or_assign(name, std::move(a)); }
};

void save_bundle(const std::filesystem::path& dir, const ArrayBundle& bundle);
ArrayBundle load_bundle(const std::filesystem::path& dir);

}  // namespace fsb::numkit
