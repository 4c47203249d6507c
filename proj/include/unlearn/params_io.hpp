#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "unlearn/errors.hpp"
#include "unlearn/layers.hpp"

namespace unlearn {

// Parameter container: a flat binary file of float64 little-endian arrays and
// a plain-text manifest with one "name ndim dims... byte_offset count" line
// per tensor (parameters first, then batchnorm running buffers). Values are
// widened to float64 on save, which is lossless for float32 training, so the
// round trip is bit-exact for either precision.

template <typename T>
void save_params(const ParamSetT<T>& params, const std::string& bin_path, const std::string& manifest_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bin_path + " for writing");
  std::ofstream man(manifest_path);
  if (!man) throw IoError("cannot open " + manifest_path + " for writing");
  man << "UNLEARN-PARAMS v1\n";
  const ArchSpec& a = params.arch;
  man << "# arch in=" << a.in_c << "x" << a.in_h << "x" << a.in_w << " f=" << a.f_c1 << "," << a.f_c2
      << " g=" << a.g_c1 << "," << a.g_c2 << "," << a.n_classes << " h=" << a.h_c1 << ","
      << a.h_out_c() << "\n";

  std::size_t offset = 0;
  auto dump = [&](const char* name, const TensorT<T>& t) {
    man << name << ' ' << t.shape.size();
    for (std::size_t d : t.shape) man << ' ' << d;
    man << ' ' << offset << ' ' << t.size() << '\n';
    for (T v : t.data) {
      const double d = static_cast<double>(v);
      bin.write(reinterpret_cast<const char*>(&d), sizeof(double));
    }
    offset += t.size() * sizeof(double);
  };
  auto& ps = const_cast<ParamSetT<T>&>(params);
  ps.for_each_param([&](const char* name, TensorT<T>& t, Net) { dump(name, t); });
  ps.for_each_buffer([&](const char* name, TensorT<T>& t) { dump(name, t); });
  if (!bin || !man) throw IoError("write failure while saving parameters");
}

template <typename T>
ParamSetT<T> load_params(const std::string& bin_path, const std::string& manifest_path) {
  std::ifstream man(manifest_path);
  if (!man) throw IoError("cannot open parameter manifest " + manifest_path);
  std::string header;
  if (!std::getline(man, header) || header != "UNLEARN-PARAMS v1")
    throw IoError("bad parameter manifest header in " + manifest_path);

  struct Entry {
    Shape shape;
    std::size_t offset = 0, count = 0;
  };
  std::map<std::string, Entry> entries;
  std::string line;
  while (std::getline(man, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string name;
    std::size_t ndim;
    Entry e;
    if (!(is >> name >> ndim)) throw IoError("malformed manifest line: " + line);
    e.shape.resize(ndim);
    for (auto& d : e.shape)
      if (!(is >> d)) throw IoError("malformed manifest line: " + line);
    if (!(is >> e.offset >> e.count)) throw IoError("malformed manifest line: " + line);
    if (numel(e.shape) != e.count) throw IoError("manifest count disagrees with shape: " + line);
    entries.emplace(std::move(name), std::move(e));
  }

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open parameter container " + bin_path);

  ParamSetT<T> params = init_params<T>(ArchSpec{}, 0);
  auto fill = [&](const char* name, TensorT<T>& t) {
    auto it = entries.find(name);
    if (it == entries.end()) throw IoError(std::string("parameter missing from manifest: ") + name);
    const Entry& e = it->second;
    if (e.shape != t.shape)
      throw IoError(std::string("parameter shape mismatch for ") + name + ": stored " +
                    shape_str(e.shape) + " vs expected " + shape_str(t.shape));
    bin.seekg(static_cast<std::streamoff>(e.offset));
    for (std::size_t i = 0; i < e.count; ++i) {
      double d;
      if (!bin.read(reinterpret_cast<char*>(&d), sizeof(double)))
        throw IoError(std::string("truncated parameter container at ") + name);
      t.data[i] = static_cast<T>(d);
    }
  };
  params.for_each_param([&](const char* name, TensorT<T>& t, Net) { fill(name, t); });
  params.for_each_buffer([&](const char* name, TensorT<T>& t) { fill(name, t); });
  return params;
}

}  // namespace unlearn
