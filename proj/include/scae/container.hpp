#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "scae/tensor.hpp"

namespace scae {

// One entry of the "SCAE" binary tensor container. Element width is 4
// (float) or 8 (double); exactly one of f32/f64 is populated.
struct ContainerEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::uint8_t width = 4;
  std::vector<float> f32;
  std::vector<double> f64;

  static ContainerEntry from(std::string name, const Tensor& t) {
    ContainerEntry e;
    e.name = std::move(name);
    e.shape = t.shape;
    e.width = 4;
    e.f32 = t.data;
    return e;
  }
  static ContainerEntry from(std::string name, const Tensor64& t) {
    ContainerEntry e;
    e.name = std::move(name);
    e.shape = t.shape;
    e.width = 8;
    e.f64 = t.data;
    return e;
  }
  // move variant: large checkpoints would not fit in memory twice
  static ContainerEntry take(std::string name, Tensor&& t) {
    ContainerEntry e;
    e.name = std::move(name);
    e.shape = std::move(t.shape);
    e.width = 4;
    e.f32 = std::move(t.data);
    return e;
  }

  Tensor as_f32() const {
    Tensor t;
    t.shape = shape;
    if (width == 4) {
      t.data = f32;
    } else {
      t.data.assign(f64.begin(), f64.end());
    }
    return t;
  }

  Tensor take_f32() {
    Tensor t;
    t.shape = shape;
    if (width == 4) {
      t.data = std::move(f32);
    } else {
      t.data.assign(f64.begin(), f64.end());
      f64.clear();
      f64.shrink_to_fit();
    }
    return t;
  }
};

// Layout (all little-endian): magic "SCAE", u16 version=1, u32 meta length,
// UTF-8 meta blob (JSON), u32 entry count; per entry: u16 name length, name
// bytes, u8 element width, u8 rank, rank x u32 dims, raw element data.
void save_container(const std::filesystem::path& path, const std::vector<ContainerEntry>& entries,
                    const std::string& meta);

std::pair<std::vector<ContainerEntry>, std::string> load_container(
    const std::filesystem::path& path);

}  // namespace scae
