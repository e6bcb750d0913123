// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/temporal_graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

namespace grn {
namespace {

constexpr std::string_view kJodieFeatureColumn = "comma_separated_list_of_features";

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void row_error(const std::string& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view s, const std::string& path, std::size_t line,
                    const char* field) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    row_error(path, line, std::string("malformed ") + field + " '" + std::string(s) + "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

EventStream EventStream::empty_like() const {
  EventStream s;
  s.num_nodes = num_nodes;
  s.edge_feat_dim = edge_feat_dim;
  s.bipartite = bipartite;
  s.dst_nodes = dst_nodes;
  s.raw_ids = raw_ids;
  return s;
}

EventStream load_csv(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header row");
  const auto header = split_commas(trim(line));
  if (header.size() < 3) row_error(path, 1, "header needs at least src,dst,timestamp");
  const bool jodie = trim(header.back()) == kJodieFeatureColumn;
  std::optional<std::size_t> feat_dim;
  if (!jodie) feat_dim = header.size() > 4 ? header.size() - 4 : 0;
  const bool has_label_col = header.size() >= 4;

  struct RawEvent {
    std::string src, dst;
    Event ev;
  };
  std::vector<RawEvent> raw;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const auto fields = split_commas(body);
    if (!feat_dim) {
      if (fields.size() < 4) row_error(path, line_no, "expected at least 4 fields");
      feat_dim = fields.size() - 4;
    }
    const std::size_t expected = (has_label_col ? 4 : 3) + *feat_dim;
    if (fields.size() != expected)
      row_error(path, line_no, "expected " + std::to_string(expected) + " fields, got " +
                                   std::to_string(fields.size()));
    RawEvent r;
    r.src = std::string(trim(fields[0]));
    r.dst = std::string(trim(fields[1]));
    if (r.src.empty() || r.dst.empty()) row_error(path, line_no, "empty node id");
    r.ev.t = parse_double(fields[2], path, line_no, "timestamp");
    if (r.ev.t < 0.0) row_error(path, line_no, "negative timestamp");
    if (has_label_col && !trim(fields[3]).empty()) {
      const double lab = parse_double(fields[3], path, line_no, "label");
      if (lab != std::floor(lab)) row_error(path, line_no, "non-integer label");
      r.ev.label = static_cast<int>(lab);
    }
    r.ev.edge_feat.reserve(*feat_dim);
    for (std::size_t i = 0; i < *feat_dim; ++i)
      r.ev.edge_feat.push_back(parse_double(fields[(has_label_col ? 4 : 3) + i], path, line_no,
                                            "feature"));
    raw.push_back(std::move(r));
  }

  std::stable_sort(raw.begin(), raw.end(),
                   [](const RawEvent& a, const RawEvent& b) { return a.ev.t < b.ev.t; });

  bool namespaced = options.bipartite == LoadOptions::Bipartite::Namespaced;
  bool bipartite = namespaced;
  if (options.bipartite == LoadOptions::Bipartite::Auto && !raw.empty()) {
    std::unordered_set<std::string> srcs;
    for (const auto& r : raw) srcs.insert(r.src);
    bipartite = std::none_of(raw.begin(), raw.end(),
                             [&](const RawEvent& r) { return srcs.count(r.dst) > 0; });
  }

  EventStream s;
  s.edge_feat_dim = feat_dim.value_or(0);
  s.bipartite = bipartite;
  std::unordered_map<std::string, std::size_t> ids;
  auto intern = [&](const std::string& key) {
    auto [it, inserted] = ids.emplace(key, s.raw_ids.size());
    if (inserted) s.raw_ids.push_back(key);
    return it->second;
  };
  std::unordered_set<std::size_t> dsts;
  s.events.reserve(raw.size());
  for (auto& r : raw) {
    r.ev.src = intern(r.src);
    r.ev.dst = intern(namespaced ? "dst:" + r.dst : r.dst);
    dsts.insert(r.ev.dst);
    s.events.push_back(std::move(r.ev));
  }
  s.num_nodes = s.raw_ids.size();
  s.dst_nodes.assign(dsts.begin(), dsts.end());
  std::sort(s.dst_nodes.begin(), s.dst_nodes.end());
  return s;
}

void save_csv(const EventStream& stream, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot write '" + path + "'");
  out << "src,dst,timestamp,label";
  for (std::size_t i = 0; i < stream.edge_feat_dim; ++i) out << ",feat_" << i;
  out << '\n';
  for (const Event& e : stream.events) {
    out << e.src << ',' << e.dst << ',' << format_double(e.t) << ',';
    if (e.label) out << *e.label;
    for (double f : e.edge_feat) out << ',' << format_double(f);
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_csv: write failed for '" + path + "'");
}

void save_id_map(const EventStream& stream, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_id_map: cannot write '" + path + "'");
  out << "raw_id,dense_id\n";
  for (std::size_t i = 0; i < stream.raw_ids.size(); ++i) out << stream.raw_ids[i] << ',' << i << '\n';
}

void SplitSpec::validate() const {
  for (double f : {train_frac, val_frac, test_frac, inductive_node_frac})
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("SplitSpec: fractions must lie in [0, 1]");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw std::invalid_argument("SplitSpec: train/val/test fractions must sum to 1");
}

StreamSplit chronological_split(const EventStream& stream, const SplitSpec& spec,
                                std::uint64_t seed) {
  spec.validate();
  const std::size_t n = stream.size();
  if (n == 0) throw std::invalid_argument("chronological_split: empty stream");
  // The epsilon keeps products like 0.7 * 30 from flooring to 20.
  auto boundary = [n](double frac) {
    return std::min(n, static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9)));
  };
  const std::size_t b1 = boundary(spec.train_frac);
  const std::size_t b2 = std::max(b1, boundary(spec.train_frac + spec.val_frac));

  StreamSplit out{stream.empty_like(), stream.empty_like(), stream.empty_like(),
                  std::vector<char>(stream.num_nodes, 0), 0};
  if (spec.mode == SplitSpec::Mode::Inductive) {
    std::vector<std::size_t> nodes(stream.num_nodes);
    std::iota(nodes.begin(), nodes.end(), std::size_t{0});
    Rng rng(mix_seed(seed, "inductive_nodes"));
    for (std::size_t i = nodes.size(); i > 1; --i) std::swap(nodes[i - 1], nodes[rng.uniform_index(i)]);
    const auto held = static_cast<std::size_t>(
        std::floor(spec.inductive_node_frac * static_cast<double>(stream.num_nodes) + 1e-9));
    for (std::size_t i = 0; i < held; ++i) out.unobserved[nodes[i]] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Event& e = stream.events[i];
    if (i < b1) {
      if (out.unobserved[e.src] || out.unobserved[e.dst]) {
        ++out.removed_train_events;
        continue;
      }
      out.train.events.push_back(e);
    } else if (i < b2) {
      out.val.events.push_back(e);
    } else {
      out.test.events.push_back(e);
    }
  }
  return out;
}

NeighborSequence build_neighbor_sequence(const EventStream& stream, std::size_t node,
                                         double query_time, std::size_t max_history) {
  if (node >= stream.num_nodes)
    throw std::out_of_range("build_neighbor_sequence: node " + std::to_string(node) +
                            " >= num_nodes " + std::to_string(stream.num_nodes));
  std::vector<const Event*> hits;
  for (const Event& e : stream.events) {
    if (!(e.t < query_time)) break;
    if (e.src == node || e.dst == node) hits.push_back(&e);
  }
  if (hits.size() > max_history) hits.erase(hits.begin(), hits.end() - static_cast<std::ptrdiff_t>(max_history));
  NeighborSequence seq;
  seq.dst = node;
  seq.query_time = query_time;
  seq.edge_feats = Matrix(hits.size(), stream.edge_feat_dim);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const Event& e = *hits[i];
    seq.srcs.push_back(e.src == node ? e.dst : e.src);
    seq.times.push_back(e.t);
    seq.deltas.push_back(query_time - e.t);
    std::copy(e.edge_feat.begin(), e.edge_feat.end(), seq.edge_feats.row(i).begin());
  }
  return seq;
}

std::vector<std::span<const Event>> chunk(std::span<const Event> events, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("chunk: batch size must be >= 1");
  std::vector<std::span<const Event>> out;
  for (std::size_t i = 0; i < events.size(); i += batch_size)
    out.push_back(events.subspan(i, std::min(batch_size, events.size() - i)));
  return out;
}

std::vector<Event> negative_sample(std::span<const Event> batch, const EventStream& stream, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("negative_sample: empty batch");
  const bool part = stream.bipartite && !stream.dst_nodes.empty();
  const std::size_t pool = part ? stream.dst_nodes.size() : stream.num_nodes;
  if (pool == 0) throw std::invalid_argument("negative_sample: no candidate nodes");
  std::vector<Event> out;
  out.reserve(batch.size());
  for (const Event& e : batch) {
    Event neg;
    neg.src = e.src;
    neg.t = e.t;
    neg.edge_feat = e.edge_feat;
    const std::size_t pick = rng.uniform_index(pool);
    neg.dst = part ? stream.dst_nodes[pick] : pick;
    out.push_back(std::move(neg));
  }
  return out;
}

EventStream synth_generate(const SynthParams& p, Rng& rng) {
  if (p.num_users == 0 || p.num_items == 0 || p.period == 0)
    throw std::invalid_argument("synth_generate: counts must be >= 1");
  if (!(p.noise_frac >= 0.0 && p.noise_frac <= 1.0))
    throw std::invalid_argument("synth_generate: noise_frac must lie in [0, 1]");
  EventStream s;
  s.num_nodes = p.num_users + p.num_items;
  s.bipartite = true;
  for (std::size_t i = 0; i < p.num_items; ++i) s.dst_nodes.push_back(p.num_users + i);
  for (std::size_t i = 0; i < s.num_nodes; ++i)
    s.raw_ids.push_back(i < p.num_users ? "u" + std::to_string(i) : "i" + std::to_string(i - p.num_users));
  s.events.reserve(p.length);
  for (std::size_t i = 0; i < p.length; ++i) {
    Event e;
    e.t = static_cast<double>(i);
    if (p.noise_frac > 0.0 && rng.bernoulli(p.noise_frac)) {
      e.src = rng.uniform_index(p.num_users);
      e.dst = p.num_users + rng.uniform_index(p.num_items);
    } else {
      const std::size_t u = i % p.num_users;
      e.src = u;
      e.dst = p.num_users + (u + i / p.period) % p.num_items;
    }
    s.events.push_back(std::move(e));
  }
  return s;
}

}  // namespace grn
