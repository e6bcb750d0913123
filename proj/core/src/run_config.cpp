// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/run_config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string_view>

namespace grn {
namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

double to_double(const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(out))
    throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

std::size_t to_count(const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  const std::string l = lower(v);
  if (l == "true" || l == "yes" || l == "1" || l == "on") return true;
  if (l == "false" || l == "no" || l == "0" || l == "off") return false;
  throw std::invalid_argument("expected true/false, got '" + v + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

double percent(const std::string& v) {
  std::string s = trim(v);
  if (!s.empty() && s.back() == '%') s.pop_back();
  return to_double(trim(s)) / 100.0;
}

std::string pct(double f) { return fmt(std::round(f * 1e6) / 1e4) + "%"; }

SynthParams& synth(RunConfig& c) {
  if (!c.synth) c.synth = SynthParams{};
  return *c.synth;
}

using Table = std::map<std::string, std::map<std::string, Field>>;

const Table& fields() {
  static const Table table = [] {
    Table t;
    auto& d = t["data"];
    d["path"] = {[](RunConfig& c, const std::string& v) { c.data_path = v; },
                 [](const RunConfig& c) { return c.data_path; }};
    d["Synthetic Users"] = {[](RunConfig& c, const std::string& v) { synth(c).num_users = to_count(v); },
                            [](const RunConfig& c) { return c.synth ? std::to_string(c.synth->num_users) : ""; }};
    d["Synthetic Items"] = {[](RunConfig& c, const std::string& v) { synth(c).num_items = to_count(v); },
                            [](const RunConfig& c) { return c.synth ? std::to_string(c.synth->num_items) : ""; }};
    d["Synthetic Period"] = {[](RunConfig& c, const std::string& v) { synth(c).period = to_count(v); },
                             [](const RunConfig& c) { return c.synth ? std::to_string(c.synth->period) : ""; }};
    d["Synthetic Noise"] = {[](RunConfig& c, const std::string& v) { synth(c).noise_frac = to_double(v); },
                            [](const RunConfig& c) { return c.synth ? fmt(c.synth->noise_frac) : ""; }};
    d["Synthetic Events"] = {[](RunConfig& c, const std::string& v) { synth(c).length = to_count(v); },
                             [](const RunConfig& c) { return c.synth ? std::to_string(c.synth->length) : ""; }};
    d["Bipartite"] = {[](RunConfig& c, const std::string& v) {
                        const std::string l = lower(v);
                        if (l == "auto") c.load.bipartite = LoadOptions::Bipartite::Auto;
                        else if (l == "namespaced") c.load.bipartite = LoadOptions::Bipartite::Namespaced;
                        else if (l == "no") c.load.bipartite = LoadOptions::Bipartite::No;
                        else throw std::invalid_argument("expected auto|namespaced|no, got '" + v + "'");
                      },
                      [](const RunConfig& c) -> std::string {
                        switch (c.load.bipartite) {
                          case LoadOptions::Bipartite::Auto: return "auto";
                          case LoadOptions::Bipartite::Namespaced: return "namespaced";
                          case LoadOptions::Bipartite::No: return "no";
                        }
                        return "auto";
                      }};
    d["Train-Validate-Test Split"] = {
        [](RunConfig& c, const std::string& v) {
          std::vector<std::string> parts;
          std::size_t start = 0;
          for (std::size_t i = 0; i <= v.size(); ++i) {
            if (i == v.size() || v[i] == '-') {
              parts.push_back(trim(std::string_view(v).substr(start, i - start)));
              start = i + 1;
            }
          }
          if (parts.size() != 3) throw std::invalid_argument("expected a-b-c percentages, got '" + v + "'");
          c.train.split.train_frac = percent(parts[0]);
          c.train.split.val_frac = percent(parts[1]);
          c.train.split.test_frac = percent(parts[2]);
          c.train.split.validate();
        },
        [](const RunConfig& c) {
          return pct(c.train.split.train_frac) + "-" + pct(c.train.split.val_frac) + "-" +
                 pct(c.train.split.test_frac);
        }};
    d["Setting"] = {[](RunConfig& c, const std::string& v) {
                      const std::string l = lower(v);
                      if (l == "transductive") c.train.split.mode = SplitSpec::Mode::Transductive;
                      else if (l == "inductive") c.train.split.mode = SplitSpec::Mode::Inductive;
                      else throw std::invalid_argument("expected transductive|inductive, got '" + v + "'");
                    },
                    [](const RunConfig& c) {
                      return std::string(c.train.split.mode == SplitSpec::Mode::Inductive ? "inductive"
                                                                                          : "transductive");
                    }};
    d["Unobservable Node Fraction"] = {
        [](RunConfig& c, const std::string& v) { c.train.split.inductive_node_frac = to_double(v); },
        [](const RunConfig& c) { return fmt(c.train.split.inductive_node_frac); }};

    auto& m = t["model"];
    m["# Layers"] = {[](RunConfig& c, const std::string& v) { c.model.num_layers = to_count(v); },
                     [](const RunConfig& c) { return std::to_string(c.model.num_layers); }};
    m["Node Embedding Size"] = {[](RunConfig& c, const std::string& v) { c.model.d_model = to_count(v); },
                                [](const RunConfig& c) { return std::to_string(c.model.d_model); }};
    m["Time Embedding Dimension"] = {[](RunConfig& c, const std::string& v) { c.model.time_dim = to_count(v); },
                                     [](const RunConfig& c) { return std::to_string(c.model.time_dim); }};
    m["# Graph Retention Heads"] = {[](RunConfig& c, const std::string& v) { c.model.heads = to_count(v); },
                                    [](const RunConfig& c) { return std::to_string(c.model.heads); }};
    m["# Groups for GN"] = {[](RunConfig& c, const std::string& v) { c.model.gn_groups = to_count(v); },
                            [](const RunConfig& c) { return std::to_string(c.model.gn_groups); }};
    m["Dropout"] = {[](RunConfig& c, const std::string& v) { c.model.dropout = to_double(v); },
                    [](const RunConfig& c) { return fmt(c.model.dropout); }};
    m["Norm Epsilon"] = {[](RunConfig& c, const std::string& v) { c.model.norm_eps = to_double(v); },
                         [](const RunConfig& c) { return fmt(c.model.norm_eps); }};
    m["Decay"] = {[](RunConfig& c, const std::string& v) { c.model.decay = DecayPolicy::parse(v); },
                  [](const RunConfig& c) { return c.model.decay.to_string(); }};
    m["Score Normalization"] = {[](RunConfig& c, const std::string& v) { c.model.normalized_scores = to_bool(v); },
                                [](const RunConfig& c) { return from_bool(c.model.normalized_scores); }};
    m["w/o temporal encoding"] = {
        [](RunConfig& c, const std::string& v) { c.model.use_temporal_encoding = !to_bool(v); },
        [](const RunConfig& c) { return from_bool(!c.model.use_temporal_encoding); }};
    m["w/o h-swish gate"] = {[](RunConfig& c, const std::string& v) { c.model.use_hswish_gate = !to_bool(v); },
                             [](const RunConfig& c) { return from_bool(!c.model.use_hswish_gate); }};
    m["w/o multi-head"] = {[](RunConfig& c, const std::string& v) { c.model.multi_head = !to_bool(v); },
                           [](const RunConfig& c) { return from_bool(!c.model.multi_head); }};
    m["Reduce head dimension"] = {[](RunConfig& c, const std::string& v) { c.model.reduce_head_dim = to_bool(v); },
                                  [](const RunConfig& c) { return from_bool(c.model.reduce_head_dim); }};
    m["Task"] = {[](RunConfig& c, const std::string& v) {
                   const std::string l = lower(v);
                   if (l == "link_prediction") c.model.task = Task::LinkPrediction;
                   else if (l == "node_classification") c.model.task = Task::NodeClassification;
                   else throw std::invalid_argument("expected link_prediction|node_classification, got '" + v + "'");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.model.task == Task::LinkPrediction ? "link_prediction"
                                                                           : "node_classification");
                 }};
    m["# Classes"] = {[](RunConfig& c, const std::string& v) { c.model.num_classes = to_count(v); },
                      [](const RunConfig& c) { return std::to_string(c.model.num_classes); }};
    m["Edge Feature Dimension"] = {[](RunConfig& c, const std::string& v) { c.model.edge_feat_dim = to_count(v); },
                                   [](const RunConfig& c) { return std::to_string(c.model.edge_feat_dim); }};

    auto& tr = t["train"];
    tr["Learning Rate"] = {[](RunConfig& c, const std::string& v) { c.train.lr = to_double(v); },
                           [](const RunConfig& c) { return fmt(c.train.lr); }};
    tr["Weight Decay"] = {[](RunConfig& c, const std::string& v) { c.train.weight_decay = to_double(v); },
                          [](const RunConfig& c) { return fmt(c.train.weight_decay); }};
    tr["Epochs"] = {[](RunConfig& c, const std::string& v) { c.train.epochs = to_count(v); },
                    [](const RunConfig& c) { return std::to_string(c.train.epochs); }};
    tr["Patience"] = {[](RunConfig& c, const std::string& v) { c.train.patience = to_count(v); },
                      [](const RunConfig& c) { return std::to_string(c.train.patience); }};
    tr["Batch Size"] = {[](RunConfig& c, const std::string& v) { c.train.batch_size = to_count(v); },
                        [](const RunConfig& c) { return std::to_string(c.train.batch_size); }};
    tr["Seed"] = {[](RunConfig& c, const std::string& v) { c.train.seed = to_count(v); },
                  [](const RunConfig& c) { return std::to_string(c.train.seed); }};
    tr["Eval Paradigm"] = {[](RunConfig& c, const std::string& v) {
                             c.train.eval_paradigm = Paradigm::parse(lower(v), c.train.eval_paradigm.chunk_size);
                           },
                           [](const RunConfig& c) {
                             std::string s = c.train.eval_paradigm.to_string();
                             return s.substr(0, s.find('('));
                           }};
    tr["Eval Chunk Size"] = {[](RunConfig& c, const std::string& v) {
                               const std::size_t b = to_count(v);
                               c.train.eval_paradigm.chunk_size = b;
                               if (c.train.eval_paradigm.kind == Paradigm::Kind::Chunkwise)
                                 c.train.eval_paradigm = Paradigm::chunkwise(b);
                             },
                             [](const RunConfig& c) { return std::to_string(c.train.eval_paradigm.chunk_size); }};

    auto& o = t["output"];
    o["checkpoint"] = {[](RunConfig& c, const std::string& v) { c.checkpoint_path = v; },
                       [](const RunConfig& c) { return c.checkpoint_path; }};
    o["metrics"] = {[](RunConfig& c, const std::string& v) { c.metrics_path = v; },
                    [](const RunConfig& c) { return c.metrics_path; }};
    return t;
  }();
  return table;
}

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || base.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base) / p).lexically_normal().string();
}

}  // namespace

RunConfig parse_run_config(std::istream& in, const ParseOptions& options) {
  RunConfig cfg;
  const Table& table = fields();
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  std::size_t data_line = 0;
  auto fail = [&](const std::string& what) {
    throw ConfigError(options.source + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s.front() == ';') continue;
    if (s.front() == '#' && s.find('=') == std::string::npos) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail("malformed section header '" + s + "'");
      section = lower(trim(std::string_view(s).substr(1, s.size() - 2)));
      if (!table.count(section)) fail("unknown section [" + section + "]");
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail("expected 'key = value', got '" + s + "'");
    if (section.empty()) fail("key outside of any section");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    const std::string value = trim(std::string_view(s).substr(eq + 1));
    const auto& sec = table.at(section);
    auto it = sec.find(key);
    if (it == sec.end()) fail("unknown key '" + key + "' in [" + section + "]");
    try {
      it->second.set(cfg, value);
    } catch (const std::exception& e) {
      fail("field '" + key + "': " + e.what());
    }
    if (section == "data" && key == "path") data_line = line_no;
  }
  cfg.data_path = resolve(options.base_dir, cfg.data_path);
  cfg.checkpoint_path = resolve(options.base_dir, cfg.checkpoint_path);
  cfg.metrics_path = resolve(options.base_dir, cfg.metrics_path);
  line_no = data_line;
  if (!cfg.data_path.empty() && cfg.synth) fail("[data] has both a path and synthetic parameters");
  if (cfg.data_path.empty() && !cfg.synth) cfg.synth = SynthParams{};
  if (options.check_paths && !cfg.data_path.empty() && !std::filesystem::exists(cfg.data_path))
    fail("field 'path': dataset '" + cfg.data_path + "' does not exist");
  line_no = 0;
  try {
    cfg.model.validate();
    cfg.train.split.validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }
  if (cfg.train.epochs == 0) fail("Epochs must be >= 1");
  if (cfg.train.batch_size == 0) fail("Batch Size must be >= 1");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  ParseOptions opt;
  opt.source = path;
  opt.base_dir = std::filesystem::path(path).parent_path().string();
  return parse_run_config(in, opt);
}

std::string format_run_config(const RunConfig& config) {
  std::ostringstream out;
  for (const char* section : {"data", "model", "train", "output"}) {
    out << '[' << section << "]\n";
    for (const auto& [key, field] : fields().at(section)) {
      const std::string v = field.get(config);
      if (v.empty()) continue;
      out << key << " = " << v << '\n';
    }
  }
  return out.str();
}

EventStream load_dataset(const RunConfig& config) {
  if (!config.data_path.empty()) return load_csv(config.data_path, config.load);
  Rng rng(mix_seed(config.train.seed, "synth"));
  return synth_generate(config.synth.value_or(SynthParams{}), rng);
}

}  // namespace grn
