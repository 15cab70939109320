/* Copyright 2026 The pqaccel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 */
#include "pqaccel/model_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pqaccel {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModelMagic = "pqaccel-model";
constexpr const char* kQModelMagic = "pqaccel-qmodel";
constexpr const char* kVersion = "v1";

// explicit little-endian packing so the on-disk format is host-independent
void put_u32(std::string& out, uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }
void put_i32(std::string& out, int32_t v) { put_u32(out, uint32_t(v)); }

void put_f64(std::string& out, double v) {
  uint64_t u = std::bit_cast<uint64_t>(v);
  put_u32(out, uint32_t(u & 0xffffffffu));
  put_u32(out, uint32_t(u >> 32));
}

struct BlobReader {
  const std::string& data;
  size_t pos = 0;
  std::string context;

  void need(size_t n) const {
    if (pos + n > data.size())
      throw DataError("size mismatch: blob '" + context + "' truncated at byte " +
                      std::to_string(pos) + " (have " + std::to_string(data.size()) +
                      " bytes)");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = (uint32_t(uint8_t(data[pos])) | (uint32_t(uint8_t(data[pos + 1])) << 8) |
                  (uint32_t(uint8_t(data[pos + 2])) << 16) |
                  (uint32_t(uint8_t(data[pos + 3])) << 24));
    pos += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  int32_t i32() { return int32_t(u32()); }
  double f64() {
    uint64_t lo = u32();
    uint64_t hi = u32();
    return std::bit_cast<double>(lo | (hi << 32));
  }
  uint8_t u8() {
    need(1);
    return uint8_t(data[pos++]);
  }
};

std::string read_file(const fs::path& path, const std::string& what) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("missing blob: cannot open '" + path.string() + "' (" + what + ")");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f) throw DataError("short write to '" + path.string() + "'");
}

void check_name(const std::string& name) {
  if (name.empty()) throw ParamError("layer name must be non-empty");
  for (char c : name)
    if (!(std::isalnum(uint8_t(c)) || c == '_' || c == '-' || c == '.'))
      throw ParamError("layer name '" + name + "' is not filename-safe");
}

// key=value attribute line parsing (first token is the record kind)
std::map<std::string, std::string> parse_attrs(const std::string& line,
                                               const std::string& context) {
  std::map<std::string, std::string> attrs;
  std::istringstream ls(line);
  std::string kind, tok;
  ls >> kind;
  while (ls >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw DataError(context + ": malformed attribute '" + tok + "'");
    attrs[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return attrs;
}

const std::string& attr(const std::map<std::string, std::string>& attrs,
                        const std::string& key, const std::string& context) {
  auto it = attrs.find(key);
  if (it == attrs.end())
    throw DataError(context + ": missing field '" + key + "'");
  return it->second;
}

int attr_int(const std::map<std::string, std::string>& attrs,
             const std::string& key, const std::string& context) {
  try {
    return std::stoi(attr(attrs, key, context));
  } catch (const std::exception&) {
    throw DataError(context + ": field '" + key + "' is not an integer");
  }
}

std::string float_blob(const std::vector<float>& v) {
  std::string out;
  out.reserve(v.size() * 4);
  for (float x : v) put_f32(out, x);
  return out;
}

std::vector<float> read_floats(BlobReader& r, size_t n) {
  std::vector<float> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = r.f32();
  return v;
}

void check_version(std::istream& in, const char* magic, const std::string& context) {
  std::string line;
  if (!std::getline(in, line))
    throw DataError("version mismatch: '" + context + "' is empty");
  std::istringstream ls(line);
  std::string m, v;
  ls >> m >> v;
  if (m != magic || v != kVersion)
    throw DataError("version mismatch: '" + context + "' starts with '" + line +
                    "', expected '" + magic + " " + kVersion + "'");
}

void write_layer_line(std::ostream& out, const LayerDesc& d) {
  const ConvLayer& l = d.layer;
  out << "layer name=" << l.name << " group=" << d.group
      << " target=" << (d.target ? 1 : 0) << " kernels=" << l.kernel_count()
      << " channels=" << l.channel_count() << " kh=" << l.kernel_h()
      << " kw=" << l.kernel_w() << " stride=" << l.stride << " pad=" << l.padding
      << " in_h=" << d.in_h << " in_w=" << d.in_w << " weights=" << l.name
      << ".w.bin bias=" << l.name << ".b.bin\n";
}

LayerDesc load_layer_line(const std::map<std::string, std::string>& attrs,
                          const fs::path& dir, const std::string& context) {
  LayerDesc d;
  d.group = attr(attrs, "group", context);
  d.target = attr_int(attrs, "target", context) != 0;
  d.in_h = attr_int(attrs, "in_h", context);
  d.in_w = attr_int(attrs, "in_w", context);
  ConvLayer& l = d.layer;
  l.name = attr(attrs, "name", context);
  const int m = attr_int(attrs, "kernels", context);
  const int n = attr_int(attrs, "channels", context);
  const int kh = attr_int(attrs, "kh", context);
  const int kw = attr_int(attrs, "kw", context);
  l.stride = attr_int(attrs, "stride", context);
  l.padding = attr_int(attrs, "pad", context);

  const std::string wfile = attr(attrs, "weights", context);
  const std::string bfile = attr(attrs, "bias", context);
  std::string wbytes = read_file(dir / wfile, "weights of layer '" + l.name + "'");
  const size_t expect_w = size_t(m) * n * kh * kw * 4;
  if (wbytes.size() != expect_w)
    throw DataError("size mismatch: weights blob '" + wfile + "' of layer '" +
                    l.name + "' has " + std::to_string(wbytes.size()) +
                    " bytes, expected " + std::to_string(expect_w));
  std::string bbytes = read_file(dir / bfile, "bias of layer '" + l.name + "'");
  if (bbytes.size() != size_t(m) * 4)
    throw DataError("size mismatch: bias blob '" + bfile + "' of layer '" + l.name +
                    "' has " + std::to_string(bbytes.size()) + " bytes, expected " +
                    std::to_string(size_t(m) * 4));

  l.weights = Tensor4(m, n, kh, kw);
  BlobReader wr{wbytes, 0, wfile};
  l.weights.data = read_floats(wr, l.weights.size());
  BlobReader br{bbytes, 0, bfile};
  l.bias = read_floats(br, size_t(m));
  l.validate();
  l.weights.validate_finite("weights of layer '" + l.name + "'");
  return d;
}

}  // namespace

const LayerDesc* Model::find(const std::string& name) const {
  for (const auto& d : layers)
    if (d.layer.name == name) return &d;
  return nullptr;
}

LayerDesc* Model::find(const std::string& name) {
  for (auto& d : layers)
    if (d.layer.name == name) return &d;
  return nullptr;
}

void save_model(const Model& model, const std::string& dir) {
  std::set<std::string> seen;
  for (const auto& d : model.layers) {
    check_name(d.layer.name);
    d.layer.validate();
    if (!seen.insert(d.layer.name).second)
      throw ParamError("duplicate layer name '" + d.layer.name + "'");
  }
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << kModelMagic << " " << kVersion << "\n";
  for (const auto& d : model.layers) {
    write_layer_line(manifest, d);
    write_file(fs::path(dir) / (d.layer.name + ".w.bin"),
               float_blob(d.layer.weights.data));
    write_file(fs::path(dir) / (d.layer.name + ".b.bin"), float_blob(d.layer.bias));
  }
  write_file(fs::path(dir) / "model.txt", manifest.str());
}

Model load_model(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "model.txt";
  std::ifstream f(manifest_path);
  if (!f) throw DataError("missing blob: cannot open manifest '" + manifest_path.string() + "'");
  check_version(f, kModelMagic, manifest_path.string());

  Model model;
  std::set<std::string> seen;
  std::string line;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::string context = manifest_path.string() + ":" + std::to_string(line_no);
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind != "layer") throw DataError(context + ": unknown record '" + kind + "'");
    auto attrs = parse_attrs(line, context);
    LayerDesc d = load_layer_line(attrs, dir, context);
    if (!seen.insert(d.layer.name).second)
      throw DataError(context + ": duplicate layer name '" + d.layer.name + "'");
    model.layers.push_back(std::move(d));
  }
  return model;
}

namespace {

std::string quantized_blob(const QuantizedLayer& q) {
  std::string out;
  for (int s = 0; s < q.partition.subspace_count; ++s) {
    if (q.kind == SchemeKind::vq) {
      const VqCodebook& cb = q.vq[s];
      for (float v : cb.centroids.data) put_f32(out, v);
      for (int32_t a : cb.assignments) put_i32(out, a);
    } else {
      const DlCodebook& cb = q.dl[s];
      for (float v : cb.dict.data) put_f32(out, v);
      for (int32_t i : cb.lambda_idx) put_i32(out, i);
      for (float v : cb.lambda_val) put_f32(out, v);
      for (uint8_t n : cb.lambda_nnz) out.push_back(char(n));
      for (int32_t a : cb.assignments) put_i32(out, a);
    }
    put_f64(out, q.subspace_error_sq[s]);
  }
  for (float b : q.bias) put_f32(out, b);
  return out;
}

void parse_quantized_blob(QuantizedLayer& q, const std::string& bytes,
                          const std::string& blob_name) {
  BlobReader r{bytes, 0, blob_name};
  const int n_cols = q.partition.columns();
  const int d = q.partition.subspace_dim;
  for (int s = 0; s < q.partition.subspace_count; ++s) {
    if (q.kind == SchemeKind::vq) {
      VqCodebook cb;
      cb.dim = d;
      cb.codewords = q.scheme.k_vq;
      cb.centroids = ColMatrix(d, cb.codewords);
      for (float& v : cb.centroids.data) v = r.f32();
      cb.assignments.resize(n_cols);
      for (int32_t& a : cb.assignments) a = r.i32();
      q.vq.push_back(std::move(cb));
    } else {
      DlCodebook cb;
      cb.dim = d;
      cb.atoms = q.scheme.l_dl;
      cb.codewords = q.scheme.k_dl;
      cb.rho = q.scheme.rho;
      cb.dict = ColMatrix(d, cb.atoms);
      for (float& v : cb.dict.data) v = r.f32();
      cb.lambda_idx.resize(size_t(cb.codewords) * cb.rho);
      for (int32_t& i : cb.lambda_idx) i = r.i32();
      cb.lambda_val.resize(size_t(cb.codewords) * cb.rho);
      for (float& v : cb.lambda_val) v = r.f32();
      cb.lambda_nnz.resize(size_t(cb.codewords));
      for (uint8_t& n : cb.lambda_nnz) n = r.u8();
      cb.assignments.resize(n_cols);
      for (int32_t& a : cb.assignments) a = r.i32();
      q.dl.push_back(std::move(cb));
    }
    q.subspace_error_sq.push_back(r.f64());
  }
  q.bias.resize(size_t(q.kernels));
  for (float& b : q.bias) b = r.f32();
  if (r.pos != bytes.size())
    throw DataError("size mismatch: blob '" + blob_name + "' has " +
                    std::to_string(bytes.size() - r.pos) + " trailing bytes");
}

}  // namespace

const QuantizedModel::Entry* QuantizedModel::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name() == name) return &e;
  return nullptr;
}

namespace {

MacReport::Entry report_entry(const LayerDesc& desc, const QuantizedLayer* q,
                              LookupCounting lc) {
  MacReport::Entry e;
  e.group = desc.group;
  const InputGeometry g{desc.in_h, desc.in_w};
  if (q != nullptr) {
    e.name = q->name;
    ConvLayer probe;
    probe.name = q->name;
    probe.weights = Tensor4(q->kernels, q->channels, q->kernel_h, q->kernel_w);
    probe.bias.assign(size_t(q->kernels), 0.0f);
    probe.stride = q->stride;
    probe.padding = q->padding;
    e.original_macs = mac_count_dense(probe, g);
    e.accelerated_macs = mac_count_quantized(*q, g, lc);
    e.quantized = true;
  } else {
    e.name = desc.layer.name;
    e.original_macs = mac_count_dense(desc.layer, g);
    e.accelerated_macs = e.original_macs;
  }
  return e;
}

}  // namespace

MacReport acceleration_report(const QuantizedModel& model,
                              const std::vector<std::string>& groups,
                              LookupCounting lc) {
  std::vector<MacReport::Entry> entries;
  for (const auto& e : model.entries)
    entries.push_back(report_entry(e.desc, e.quantized ? &*e.quantized : nullptr, lc));
  return make_mac_report(std::move(entries), groups);
}

MacReport acceleration_report(const Model& model,
                              const std::vector<std::string>& groups) {
  std::vector<MacReport::Entry> entries;
  for (const auto& d : model.layers)
    entries.push_back(report_entry(d, nullptr, LookupCounting::counted));
  return make_mac_report(std::move(entries), groups);
}

void save_quantized_model(const QuantizedModel& model, const std::string& dir) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << kQModelMagic << " " << kVersion << "\n";
  std::set<std::string> seen;
  for (const auto& e : model.entries) {
    check_name(e.name());
    if (!seen.insert(e.name()).second)
      throw ParamError("duplicate layer name '" + e.name() + "'");
    if (!e.quantized) {
      write_layer_line(manifest, e.desc);
      write_file(fs::path(dir) / (e.desc.layer.name + ".w.bin"),
                 float_blob(e.desc.layer.weights.data));
      write_file(fs::path(dir) / (e.desc.layer.name + ".b.bin"),
                 float_blob(e.desc.layer.bias));
      continue;
    }
    const QuantizedLayer& q = *e.quantized;
    const QuantScheme& sc = q.scheme;
    manifest << "qlayer name=" << q.name << " group=" << e.desc.group
             << " target=" << (e.desc.target ? 1 : 0) << " kernels=" << q.kernels
             << " channels=" << q.channels << " kh=" << q.kernel_h
             << " kw=" << q.kernel_w << " stride=" << q.stride
             << " pad=" << q.padding << " in_h=" << e.desc.in_h
             << " in_w=" << e.desc.in_w << " kind=" << scheme_kind_name(q.kind)
             << " d=" << q.partition.subspace_dim << " k_vq=" << sc.k_vq
             << " l_dl=" << sc.l_dl << " k_dl=" << sc.k_dl << " rho=" << sc.rho
             << " seed=" << sc.seed << " kmeans_max_iter=" << sc.kmeans_max_iter
             << " dl_iters=" << sc.dl_iters << " blob=" << q.name << ".q.bin\n";
    for (const auto& w : q.warnings) manifest << "qnote name=" << q.name << " text=" << w << "\n";
    write_file(fs::path(dir) / (q.name + ".q.bin"), quantized_blob(q));
  }
  write_file(fs::path(dir) / "model.q.txt", manifest.str());
}

QuantizedModel load_quantized_model(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "model.q.txt";
  std::ifstream f(manifest_path);
  if (!f)
    throw DataError("missing blob: cannot open manifest '" + manifest_path.string() + "'");
  check_version(f, kQModelMagic, manifest_path.string());

  QuantizedModel model;
  std::set<std::string> seen;
  std::string line;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::string context = manifest_path.string() + ":" + std::to_string(line_no);
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "layer") {
      auto attrs = parse_attrs(line, context);
      QuantizedModel::Entry e;
      e.desc = load_layer_line(attrs, dir, context);
      if (!seen.insert(e.name()).second)
        throw DataError(context + ": duplicate layer name '" + e.name() + "'");
      model.entries.push_back(std::move(e));
    } else if (kind == "qlayer") {
      auto attrs = parse_attrs(line, context);
      QuantizedModel::Entry e;
      e.desc.group = attr(attrs, "group", context);
      e.desc.target = attr_int(attrs, "target", context) != 0;
      e.desc.in_h = attr_int(attrs, "in_h", context);
      e.desc.in_w = attr_int(attrs, "in_w", context);

      QuantizedLayer q;
      q.name = attr(attrs, "name", context);
      e.desc.layer.name = q.name;
      q.kernels = attr_int(attrs, "kernels", context);
      q.channels = attr_int(attrs, "channels", context);
      q.kernel_h = attr_int(attrs, "kh", context);
      q.kernel_w = attr_int(attrs, "kw", context);
      q.stride = attr_int(attrs, "stride", context);
      q.padding = attr_int(attrs, "pad", context);
      q.kind = scheme_kind_from(attr(attrs, "kind", context));
      const int d = attr_int(attrs, "d", context);
      q.partition.subspace_dim = d;
      q.partition.subspace_count = (q.channels + d - 1) / d;
      q.partition.pad_channels = q.partition.subspace_count * d - q.channels;
      q.partition.kernels = q.kernels;
      q.partition.kernel_h = q.kernel_h;
      q.partition.kernel_w = q.kernel_w;
      q.scheme.kind = q.kind;
      q.scheme.subspace_dim = d;
      q.scheme.k_vq = attr_int(attrs, "k_vq", context);
      q.scheme.l_dl = attr_int(attrs, "l_dl", context);
      q.scheme.k_dl = attr_int(attrs, "k_dl", context);
      q.scheme.rho = attr_int(attrs, "rho", context);
      q.scheme.seed = uint32_t(std::stoul(attr(attrs, "seed", context)));
      q.scheme.kmeans_max_iter = attr_int(attrs, "kmeans_max_iter", context);
      q.scheme.dl_iters = attr_int(attrs, "dl_iters", context);

      const std::string blob_file = attr(attrs, "blob", context);
      std::string bytes =
          read_file(fs::path(dir) / blob_file, "codebooks of layer '" + q.name + "'");
      parse_quantized_blob(q, bytes, blob_file);
      if (!seen.insert(q.name).second)
        throw DataError(context + ": duplicate layer name '" + q.name + "'");
      e.quantized = std::move(q);
      model.entries.push_back(std::move(e));
    } else if (kind == "qnote") {
      auto eq = line.find("text=");
      auto attrs = parse_attrs(line.substr(0, eq), context);
      const std::string name = attr(attrs, "name", context);
      bool found = false;
      for (auto& e : model.entries)
        if (e.quantized && e.quantized->name == name) {
          e.quantized->warnings.push_back(line.substr(eq + 5));
          found = true;
          break;
        }
      if (!found) throw DataError(context + ": qnote for unknown layer '" + name + "'");
    } else {
      throw DataError(context + ": unknown record '" + kind + "'");
    }
  }
  return model;
}

}  // namespace pqaccel
