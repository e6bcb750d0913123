// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/training.hpp"

#include <sys/resource.h>

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "grn/metrics.hpp"
#include "json.hpp"

namespace grn {
namespace {

using Clock = std::chrono::steady_clock;

std::vector<Query> link_queries(std::span<const Event> batch, std::span<const Event> negatives) {
  std::vector<Query> q;
  q.reserve(3 * batch.size());
  for (const Event& e : batch) q.push_back({e.src, e.t});
  for (const Event& e : batch) q.push_back({e.dst, e.t});
  for (const Event& e : negatives) q.push_back({e.dst, e.t});
  return q;
}

struct Scores {
  std::vector<double> score;  // binary: P(positive); multi-class: row-major C probs
  std::vector<double> label;
};

struct HeadOut {
  Var loss_input;  // link: probabilities (2B×1); class: logits
  std::vector<double> labels;
  std::vector<std::size_t> class_labels;
  std::vector<std::size_t> labelled;  // event indices scored (class task)
};

// Shared by training and evaluation: embeds the batch queries and runs the head.
HeadOut run_head(Tape& t, const GrnModel& model, std::span<const Var> pv, const NodeStateTable& table,
                 std::span<const Event> batch, std::span<const Event> negatives,
                 const ForwardOptions& opt, std::vector<NodeUpdate>* updates) {
  const GrnConfig& cfg = model.config();
  HeadOut out;
  const std::size_t b = batch.size();
  if (cfg.task == Task::LinkPrediction) {
    const auto queries = link_queries(batch, negatives);
    BatchOutput fwd = forward_batch(t, model, pv, table, batch, queries, opt);
    Var zs = ad::slice_rows(t, fwd.embeddings, 0, b);
    Var zd = ad::slice_rows(t, fwd.embeddings, b, b);
    Var zn = ad::slice_rows(t, fwd.embeddings, 2 * b, b);
    const Var probs[] = {link_probability(t, model, pv, zs, zd), link_probability(t, model, pv, zs, zn)};
    out.loss_input = ad::concat_rows(t, probs);
    out.labels.assign(b, 1.0);
    out.labels.resize(2 * b, 0.0);
    if (updates) *updates = std::move(fwd.updates);
    return out;
  }
  std::vector<Query> queries;
  for (std::size_t j = 0; j < b; ++j) {
    if (!batch[j].label) continue;
    const int lab = *batch[j].label;
    if (lab < 0 || static_cast<std::size_t>(lab) >= cfg.num_classes)
      throw std::invalid_argument("label " + std::to_string(lab) + " outside [0, " +
                                  std::to_string(cfg.num_classes) + ")");
    queries.push_back({batch[j].src, batch[j].t});
    out.labelled.push_back(j);
    out.class_labels.push_back(static_cast<std::size_t>(lab));
    out.labels.push_back(static_cast<double>(lab));
  }
  BatchOutput fwd = forward_batch(t, model, pv, table, batch, queries, opt);
  if (!queries.empty()) out.loss_input = class_logits(t, model, pv, fwd.embeddings);
  if (updates) *updates = std::move(fwd.updates);
  return out;
}

Var head_loss(Tape& t, const GrnConfig& cfg, const HeadOut& h) {
  if (cfg.task == Task::LinkPrediction) return ad::bce(t, h.loss_input, h.labels);
  if (cfg.num_classes == 2) return ad::bce(t, ad::sigmoid(t, h.loss_input), h.labels);
  return ad::softmax_cross_entropy(t, h.loss_input, h.class_labels);
}

double macro_metric(const std::vector<double>& probs, const std::vector<double>& labels,
                    std::size_t classes, double (*metric)(std::span<const double>, std::span<const double>)) {
  const std::size_t n = labels.size();
  double total = 0.0;
  std::size_t used = 0;
  std::vector<double> s(n), y(n);
  for (std::size_t c = 0; c < classes; ++c) {
    double pos = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = probs[i * classes + c];
      y[i] = labels[i] == static_cast<double>(c) ? 1.0 : 0.0;
      pos += y[i];
    }
    if (pos == 0.0 || pos == static_cast<double>(n)) continue;
    total += metric(s, y);
    ++used;
  }
  if (used == 0) throw std::invalid_argument("evaluate: labels cover a single class");
  return total / static_cast<double>(used);
}

}  // namespace

std::string MetricsReport::to_json(bool include_timing) const {
  nlohmann::ordered_json j;
  j["phase"] = phase;
  if (epoch) j["epoch"] = *epoch;
  if (!paradigm.empty()) j["paradigm"] = paradigm;
  j["num_events"] = num_events;
  if (phase == "epoch") j["train_loss"] = train_loss;
  j["loss"] = loss;
  j["ap"] = ap;
  j["auc_roc"] = auc_roc;
  if (include_timing) {
    j["wall_latency_s"] = wall_latency_s;
    j["throughput_eps"] = throughput_eps;
    j["peak_memory_bytes"] = peak_memory_bytes;
  }
  return j.dump();
}

std::size_t peak_memory_bytes() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<std::size_t>(ru.ru_maxrss) * 1024;  // ru_maxrss is in KiB on Linux
}

MetricsReport evaluate(const GrnModel& model, const EvalInput& input, Paradigm paradigm,
                       std::uint64_t seed) {
  const GrnConfig& cfg = model.config();
  if (input.universe == nullptr) throw std::invalid_argument("evaluate: no node universe");
  if (input.target.empty()) throw std::invalid_argument("evaluate: empty target segment");
  if (input.update_interval == 0) throw std::invalid_argument("evaluate: update_interval must be >= 1");
  NodeStateTable table = NodeStateTable::create(input.universe->num_nodes, cfg);
  Tape tape;
  const std::vector<Var> pv = bind_params(tape, model);
  const std::size_t mark = tape.size();
  ForwardOptions opt{paradigm, nullptr};

  for (auto segment : input.history) {
    if (segment.empty()) continue;
    for (auto batch : chunk(segment, input.update_interval)) {
      BatchOutput fwd = forward_batch(tape, model, pv, table, batch, {}, opt);
      apply_updates(table, std::move(fwd.updates));
      tape.truncate(mark);
    }
  }

  auto keep = [&](const Event& e) {
    return input.unobserved == nullptr || (*input.unobserved)[e.src] || (*input.unobserved)[e.dst];
  };
  Rng neg_rng(mix_seed(seed, "eval_negatives"));
  std::vector<double> scores, labels;
  const std::size_t classes = cfg.task == Task::LinkPrediction ? 2 : cfg.num_classes;
  std::size_t scored_events = 0;
  const auto start = Clock::now();
  for (auto batch : chunk(input.target, input.update_interval)) {
    std::vector<Event> negs;
    if (cfg.task == Task::LinkPrediction) negs = negative_sample(batch, *input.universe, neg_rng);
    std::vector<NodeUpdate> updates;
    HeadOut h = run_head(tape, model, pv, table, batch, negs, opt, &updates);
    if (cfg.task == Task::LinkPrediction) {
      const Matrix& p = tape.value(h.loss_input);
      for (std::size_t j = 0; j < batch.size(); ++j) {
        if (!keep(batch[j])) continue;
        ++scored_events;
        scores.push_back(p(j, 0));
        labels.push_back(1.0);
        scores.push_back(p(batch.size() + j, 0));
        labels.push_back(0.0);
      }
    } else if (!h.labelled.empty()) {
      const Matrix probs = class_probabilities(tape.value(h.loss_input), cfg.num_classes);
      for (std::size_t i = 0; i < h.labelled.size(); ++i) {
        if (!keep(batch[h.labelled[i]])) continue;
        ++scored_events;
        labels.push_back(h.labels[i]);
        if (classes == 2) {
          scores.push_back(probs(i, 1));
        } else {
          for (std::size_t c = 0; c < classes; ++c) scores.push_back(probs(i, c));
        }
      }
    }
    apply_updates(table, std::move(updates));
    tape.truncate(mark);
  }
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  if (scored_events == 0) {
    throw std::invalid_argument(input.unobserved
                                    ? "evaluate: no target events touch an unobserved node"
                                    : "evaluate: no target events to score");
  }

  MetricsReport r;
  r.phase = "eval";
  r.paradigm = paradigm.to_string();
  r.num_events = scored_events;
  if (classes == 2) {
    r.loss = bce_loss(scores, labels);
    r.ap = average_precision(scores, labels);
    r.auc_roc = auc_roc(scores, labels);
  } else {
    double loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      loss -= std::log(std::max(scores[i * classes + static_cast<std::size_t>(labels[i])], 1e-12));
    r.loss = loss / static_cast<double>(labels.size());
    r.ap = macro_metric(scores, labels, classes, average_precision);
    r.auc_roc = macro_metric(scores, labels, classes, auc_roc);
  }
  r.wall_latency_s = elapsed;
  r.throughput_eps = elapsed > 0.0 ? static_cast<double>(input.target.size()) / elapsed : 0.0;
  r.peak_memory_bytes = peak_memory_bytes();
  return r;
}

MetricsReport evaluate_segment(const GrnModel& model, const EventStream& stream,
                               const StreamSplit& split, Segment segment, Paradigm paradigm,
                               std::size_t update_interval, std::uint64_t seed) {
  EvalInput in;
  in.universe = &stream;
  in.update_interval = update_interval;
  const bool inductive = std::any_of(split.unobserved.begin(), split.unobserved.end(),
                                     [](char c) { return c != 0; });
  switch (segment) {
    case Segment::Train:
      in.target = split.train.events;
      break;
    case Segment::Val:
      in.history = {split.train.events};
      in.target = split.val.events;
      break;
    case Segment::Test:
      in.history = {split.train.events, split.val.events};
      in.target = split.test.events;
      break;
  }
  if (inductive && segment != Segment::Train) in.unobserved = &split.unobserved;
  MetricsReport r = evaluate(model, in, paradigm, seed);
  r.phase = segment == Segment::Train ? "train" : segment == Segment::Val ? "val" : "test";
  return r;
}

double batch_loss(const GrnModel& model, const NodeStateTable& table, std::span<const Event> batch,
                  std::span<const Event> negatives, Paradigm paradigm, Rng* dropout_rng,
                  std::vector<Matrix>* grads, std::vector<NodeUpdate>* updates) {
  Tape tape(grads);
  const std::vector<Var> pv = bind_params(tape, model);
  HeadOut h = run_head(tape, model, pv, table, batch, negatives, {paradigm, dropout_rng}, updates);
  if (h.labels.empty()) return 0.0;
  Var loss = head_loss(tape, model.config(), h);
  if (grads) tape.backward(loss);
  return tape.value(loss)(0, 0);
}

FitResult fit(const EventStream& stream, GrnConfig config, const TrainConfig& train,
              const EpochCallback& on_epoch) {
  if (train.epochs == 0) throw std::invalid_argument("fit: epochs must be >= 1");
  if (train.batch_size == 0) throw std::invalid_argument("fit: batch_size must be >= 1");
  config.edge_feat_dim = stream.edge_feat_dim;
  const StreamSplit split = chronological_split(stream, train.split, train.seed);
  if (split.train.empty()) throw std::invalid_argument("fit: empty training segment");
  if (split.val.empty()) throw std::invalid_argument("fit: empty validation segment");

  FitResult result{GrnModel(config, mix_seed(train.seed, "init")), {}, {}, 0, std::nullopt};
  GrnModel& model = result.model;
  result.adam = AdamState::for_params(model.values(), train.lr, train.weight_decay);
  std::vector<Matrix> best = model.values();
  double best_ap = -1.0;
  const Paradigm train_paradigm = Paradigm::chunkwise(train.batch_size);

  for (std::size_t epoch = 1; epoch <= train.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    NodeStateTable table = NodeStateTable::create(stream.num_nodes, model.config());
    Rng neg_rng(mix_seed(train.seed, "train_negatives", epoch));
    Rng drop_rng(mix_seed(train.seed, "dropout", epoch));
    double loss_sum = 0.0;
    std::size_t loss_batches = 0, batch_index = 0;
    for (auto batch : chunk(split.train.events, train.batch_size)) {
      std::vector<Event> negs;
      if (config.task == Task::LinkPrediction) negs = negative_sample(batch, stream, neg_rng);
      std::vector<Matrix> grads = model.zeros_like();
      std::vector<NodeUpdate> updates;
      double loss = 0.0;
      try {
        loss = batch_loss(model, table, batch, negs, train_paradigm, &drop_rng, &grads, &updates);
      } catch (const std::domain_error& e) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index) + ": " + e.what());
      }
      if (!std::isfinite(loss))
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_index) + ": non-finite loss");
      adam_step(model.values(), grads, result.adam);
      apply_updates(table, std::move(updates));
      loss_sum += loss;
      ++loss_batches;
      ++batch_index;
    }

    MetricsReport r = evaluate_segment(model, stream, split, Segment::Val, train_paradigm,
                                       train.batch_size, mix_seed(train.seed, "val"));
    r.phase = "epoch";
    r.epoch = epoch;
    r.wall_latency_s = std::chrono::duration<double>(Clock::now() - epoch_start).count();
    r.train_loss = loss_batches ? loss_sum / static_cast<double>(loss_batches) : 0.0;
    result.history.push_back(r);
    if (on_epoch) on_epoch(r);
    if (r.ap > best_ap) {
      best_ap = r.ap;
      result.best_epoch = epoch;
      best = model.values();
    }
    if (epoch - result.best_epoch > train.patience) break;
  }
  model.values() = std::move(best);
  if (train.final_test && !split.test.empty()) {
    result.test = evaluate_segment(model, stream, split, Segment::Test, train.eval_paradigm,
                                   train.batch_size, mix_seed(train.seed, "test"));
  }
  return result;
}

}  // namespace grn
