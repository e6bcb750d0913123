// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace grn {
namespace {

constexpr char kMagic[8] = {'G', 'R', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
  }
  template <typename T>
  void pod(T v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void bytes(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void matrix(const Matrix& m) {
    pod<std::uint64_t>(m.rows());
    pod<std::uint64_t>(m.cols());
    out_.write(reinterpret_cast<const char*>(m.data().data()),
               static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("checkpoint: write failed for '" + path_ + "'");
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  }
  template <typename T>
  T pod() {
    T v{};
    read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  std::string bytes() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ULL << 32)) fail("implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  Matrix matrix() {
    const auto r = pod<std::uint64_t>();
    const auto c = pod<std::uint64_t>();
    if (r > (1ULL << 28) || c > (1ULL << 28) || r * c > (1ULL << 30)) fail("implausible matrix shape");
    Matrix m(r, c);
    read(reinterpret_cast<char*>(m.data().data()), m.size() * sizeof(double));
    return m;
  }
  void read(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error("checkpoint '" + path_ + "': " + what);
  }

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace

Checkpoint make_checkpoint(const RunConfig& run, const GrnModel& model, const AdamState& adam) {
  Checkpoint c;
  c.run = run;
  c.run.model = model.config();
  c.names = model.names();
  c.values = model.values();
  c.adam = adam;
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  if (ckpt.names.size() != ckpt.values.size())
    throw std::invalid_argument("save_checkpoint: names/values length mismatch");
  Writer w(path);
  w.raw(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kVersion);
  w.bytes(format_run_config(ckpt.run));
  w.pod<std::uint64_t>(ckpt.values.size());
  for (std::size_t i = 0; i < ckpt.values.size(); ++i) {
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.names[i].size()));
    w.raw(ckpt.names[i].data(), ckpt.names[i].size());
    w.matrix(ckpt.values[i]);
  }
  const AdamState& a = ckpt.adam;
  for (double v : {a.lr, a.beta1, a.beta2, a.eps, a.weight_decay}) w.pod<double>(v);
  w.pod<std::uint64_t>(a.step);
  for (const auto* moments : {&a.m, &a.v}) {
    w.pod<std::uint64_t>(moments->size());
    for (const auto& m : *moments) w.matrix(m);
  }
  w.finish();
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("bad magic (not a GRN checkpoint)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  Checkpoint c;
  std::istringstream cfg(r.bytes());
  ParseOptions opt;
  opt.source = path + " (embedded config)";
  opt.check_paths = false;
  c.run = parse_run_config(cfg, opt);
  const auto count = r.pod<std::uint64_t>();
  if (count > 100000) r.fail("implausible parameter count");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto n = r.pod<std::uint32_t>();
    std::string name(n, '\0');
    r.read(name.data(), n);
    c.names.push_back(std::move(name));
    c.values.push_back(r.matrix());
  }
  AdamState& a = c.adam;
  a.lr = r.pod<double>();
  a.beta1 = r.pod<double>();
  a.beta2 = r.pod<double>();
  a.eps = r.pod<double>();
  a.weight_decay = r.pod<double>();
  a.step = r.pod<std::uint64_t>();
  for (auto* moments : {&a.m, &a.v}) {
    const auto k = r.pod<std::uint64_t>();
    if (k > 100000) r.fail("implausible moment count");
    for (std::uint64_t i = 0; i < k; ++i) moments->push_back(r.matrix());
  }
  return c;
}

GrnModel restore_model(const Checkpoint& ckpt) {
  GrnModel model(ckpt.run.model, 0);
  if (model.names() != ckpt.names)
    throw std::runtime_error("checkpoint parameters do not match the configured architecture");
  for (std::size_t i = 0; i < ckpt.values.size(); ++i) {
    const Matrix& want = model.values()[i];
    const Matrix& got = ckpt.values[i];
    if (want.rows() != got.rows() || want.cols() != got.cols())
      throw std::runtime_error("checkpoint parameter '" + ckpt.names[i] + "' has shape " +
                               got.shape() + ", config expects " + want.shape());
  }
  model.values() = ckpt.values;
  return model;
}

}  // namespace grn
