// SPDX-License-Identifier: Apache-2.0
#include "wig/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include "wig/autodiff.hpp"
#include "wig/network.hpp"
#include "wig/wmmse.hpp"

#include <nlohmann/json.hpp>

namespace wig {

std::string to_string(Optimizer opt) {
  return opt == Optimizer::RMSPROP ? "rmsprop" : "adam";
}

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "rmsprop") return Optimizer::RMSPROP;
  if (name == "adam") return Optimizer::ADAM;
  throw std::invalid_argument("unknown optimizer: " + name);
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0))
    throw std::invalid_argument("lr_decay must be in (0, 1]");
  if (decay_every <= 0) throw std::invalid_argument("decay_every must be positive");
  if (train_size <= 0) throw std::invalid_argument("train_size must be positive");
  if (test_size <= 0) throw std::invalid_argument("test_size must be positive");
}

TrainConfig TrainConfig::defaults_for(ModelKind kind) {
  TrainConfig tc;
  if (kind == ModelKind::FCDNN) {
    tc.optimizer = Optimizer::ADAM;
    tc.lr0 = 1e-3;
    tc.lr_decay = 1.0;
  } else {
    tc.optimizer = Optimizer::RMSPROP;
    tc.lr0 = 5e-4;
    tc.lr_decay = 0.9;
  }
  return tc;
}

void optimizer_step(Matrix& theta, const Matrix& grad, OptState& state, Optimizer opt,
                    double lr) {
  constexpr double kEps = 1e-8;
  if (opt == Optimizer::RMSPROP) {
    if (state.s.size() == 0) state.s = Matrix::Zero(theta.rows(), theta.cols());
    state.s = 0.9 * state.s.array() + 0.1 * grad.array().square();
    theta.array() -= lr * grad.array() / (state.s.array().sqrt() + kEps);
  } else {
    if (state.m.size() == 0) {
      state.m = Matrix::Zero(theta.rows(), theta.cols());
      state.v = Matrix::Zero(theta.rows(), theta.cols());
    }
    ++state.t;
    state.m = 0.9 * state.m.array() + 0.1 * grad.array();
    state.v = 0.999 * state.v.array() + 0.001 * grad.array().square();
    const double bc1 = 1.0 - std::pow(0.9, state.t);
    const double bc2 = 1.0 - std::pow(0.999, state.t);
    theta.array() -=
        lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + kEps);
  }
}

namespace {

double rms_of_channels(const Dataset& data) {
  double acc = 0.0;
  std::int64_t count = 0;
  for (const auto& s : data.samples) {
    acc += s.h.array().square().sum();
    count += s.h.size();
  }
  if (count == 0 || !(acc > 0.0)) return 1.0;
  return std::sqrt(acc / static_cast<double>(count));
}

}  // namespace

TrainResult train(Model& model, const Dataset& train_set, const TrainConfig& tc) {
  tc.validate();
  if (train_set.samples.empty())
    throw std::invalid_argument("train(): training set is empty");
  if (train_set.cfg != model.cfg) {
    throw std::invalid_argument("train(): dataset network differs from model network:\n" +
                                config_diff(train_set.cfg, model.cfg));
  }

  if (tc.standardize_input) model.h_scale = rms_of_channels(train_set);

  const BatchFeatures fb = prepare_batch(model, train_set.samples, /*with_labels=*/true);

  // One optimizer slot per tied group; each group's representative is its
  // first member and the updated value is written back to every member.
  std::vector<OptState> states(model.tied_groups.size());

  TrainResult result;
  result.mse_history.reserve(static_cast<std::size_t>(tc.epochs));

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    const ad::Var out = forward_on_tape(model, fb, tape, leaves);
    const ad::Var labels = tape.leaf(fb.labels_norm);
    const ad::Var diff = tape.sub(out, labels);
    const double inv_n =
        1.0 / static_cast<double>(fb.labels_norm.rows() * fb.labels_norm.cols());
    const ad::Var loss = tape.scale(tape.sum(tape.cwise_mul(diff, diff)), inv_n);

    const double mse = tape.value(loss)(0, 0);
    if (!std::isfinite(mse)) {
      throw std::runtime_error("train(): loss became non-finite at epoch " +
                               std::to_string(epoch));
    }
    result.mse_history.push_back(mse);

    tape.backward(loss);

    double lr = tc.lr0;
    if (tc.optimizer == Optimizer::RMSPROP)
      lr *= std::pow(tc.lr_decay, epoch / tc.decay_every);

    for (std::size_t g = 0; g < model.tied_groups.size(); ++g) {
      const auto& group = model.tied_groups[g];
      Matrix theta = model.params[static_cast<std::size_t>(group.front())].value;
      optimizer_step(theta, tape.grad(leaves[g]), states[g], tc.optimizer, lr);
      for (int idx : group) model.params[static_cast<std::size_t>(idx)].value = theta;
    }
  }
  return result;
}

double gradient_check(const Model& model, const std::vector<LabeledSample>& samples,
                      int n_params, std::uint64_t seed, double eps) {
  if (samples.empty()) throw std::invalid_argument("gradient_check(): no samples");
  if (n_params <= 0) throw std::invalid_argument("gradient_check(): n_params must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("gradient_check(): eps must be positive");

  Model work = model;
  const BatchFeatures fb = prepare_batch(work, samples, /*with_labels=*/true);
  const double inv_n =
      1.0 / static_cast<double>(fb.labels_norm.rows() * fb.labels_norm.cols());

  const auto loss_at = [&](const Model& m) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    const ad::Var out = forward_on_tape(m, fb, tape, leaves);
    const Matrix diff = tape.value(out) - fb.labels_norm;
    return diff.array().square().sum() * inv_n;
  };

  // Analytic gradients, one per tied group.
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  const ad::Var out = forward_on_tape(work, fb, tape, leaves);
  const ad::Var labels = tape.leaf(fb.labels_norm);
  const ad::Var diff = tape.sub(out, labels);
  const ad::Var loss = tape.scale(tape.sum(tape.cwise_mul(diff, diff)), inv_n);
  tape.backward(loss);

  // Enumerate every (group, row, col) coordinate, then sample without
  // replacement.
  struct Coord {
    std::size_t group;
    Index r, c;
  };
  std::vector<Coord> coords;
  for (std::size_t g = 0; g < work.tied_groups.size(); ++g) {
    const Matrix& rep = work.params[static_cast<std::size_t>(work.tied_groups[g].front())].value;
    for (Index r = 0; r < rep.rows(); ++r)
      for (Index c = 0; c < rep.cols(); ++c) coords.push_back({g, r, c});
  }
  std::mt19937_64 rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  const std::size_t take = std::min<std::size_t>(coords.size(), static_cast<std::size_t>(n_params));

  double max_rel = 0.0;
  for (std::size_t i = 0; i < take; ++i) {
    const Coord& k = coords[i];
    const auto& group = work.tied_groups[k.group];
    const double base = work.params[static_cast<std::size_t>(group.front())].value(k.r, k.c);

    const auto set_all = [&](double v) {
      for (int idx : group) work.params[static_cast<std::size_t>(idx)].value(k.r, k.c) = v;
    };
    set_all(base + eps);
    const double lp = loss_at(work);
    set_all(base - eps);
    const double lm = loss_at(work);
    set_all(base);

    const double numeric = (lp - lm) / (2.0 * eps);
    const double analytic = tape.grad(leaves[k.group])(k.r, k.c);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
  }
  return max_rel;
}

double performance_ratio(const Model& model, const Dataset& test_set) {
  if (test_set.samples.empty())
    throw std::invalid_argument("performance_ratio(): test set is empty");
  double acc = 0.0;
  int used = 0;
  int skipped = 0;
  for (const auto& s : test_set.samples) {
    const double denom = s.achieved_rate;
    if (!(denom > 0.0) || !std::isfinite(denom)) {
      ++skipped;
      continue;
    }
    const Vector p = model.forward(s.p_max, s.h);
    acc += sum_rate(s.h, p, model.cfg) / denom;
    ++used;
  }
  if (skipped > 0) {
    std::cerr << "performance_ratio: skipped " << skipped
              << " sample(s) with non-positive label rate\n";
  }
  if (used == 0)
    throw std::runtime_error("performance_ratio(): no usable samples in test set");
  return acc / static_cast<double>(used);
}

double runtime_bench(const Model& model, const Dataset& inputs, int n) {
  if (n <= 0) return 0.0;
  if (inputs.samples.empty())
    throw std::invalid_argument("runtime_bench(): input set is empty");
  const auto& ss = inputs.samples;
  double sink = model.forward(ss[0].p_max, ss[0].h).sum();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < n; ++i) {
    const auto& s = ss[static_cast<std::size_t>(i) % ss.size()];
    sink += model.forward(s.p_max, s.h).sum();
  }
  const auto t1 = std::chrono::steady_clock::now();
  if (!std::isfinite(sink)) std::cerr << "runtime_bench: non-finite outputs\n";
  return std::chrono::duration<double>(t1 - t0).count();
}

double wmmse_bench(const Dataset& inputs, const WmmseOptions& opts, int n) {
  if (n <= 0) return 0.0;
  if (inputs.samples.empty())
    throw std::invalid_argument("wmmse_bench(): input set is empty");
  const auto& ss = inputs.samples;
  double sink = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < n; ++i) {
    const auto& s = ss[static_cast<std::size_t>(i) % ss.size()];
    sink += wmmse_solve(s.h, s.p_max, inputs.cfg, opts,
                        derive_seed(inputs.seed, static_cast<std::uint64_t>(i)))
                .rate;
  }
  const auto t1 = std::chrono::steady_clock::now();
  if (!std::isfinite(sink)) std::cerr << "wmmse_bench: non-finite rates\n";
  return std::chrono::duration<double>(t1 - t0).count();
}

void save_report_json(const EvalReport& report, const std::string& path) {
  nlohmann::json j;
  j["model_kind"] = report.model_kind;
  j["network"] = report.cfg;
  j["mse_history"] = report.mse_history;
  j["perf_ratio"] = report.perf_ratio;
  j["param_count"] = report.param_count;
  j["inference_time_1000"] = report.inference_time_1000;
  j["model_seed"] = report.model_seed;
  j["data_seed"] = report.data_seed;
  j["train_size"] = report.train_size;
  j["test_size"] = report.test_size;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

void save_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "epoch,mse\n";
  for (std::size_t i = 0; i < report.mse_history.size(); ++i)
    out << i << "," << report.mse_history[i] << "\n";
}

std::vector<SweepCell> sweep(ModelKind kind, const Dataset& pool, const Dataset& test_set,
                             const std::vector<int>& sizes, const TrainConfig& tc,
                             int reps_per_size, int jobs) {
  if (reps_per_size <= 0) throw std::invalid_argument("sweep(): reps_per_size must be positive");
  if (jobs <= 0) throw std::invalid_argument("sweep(): jobs must be positive");

  std::map<int, Dataset> subsets;
  std::vector<SweepCell> cells;
  std::uint64_t ordinal = 0;
  for (int size : sizes) {
    if (size <= 0 || static_cast<std::size_t>(size) > pool.samples.size()) {
      throw std::invalid_argument("sweep(): size " + std::to_string(size) +
                                  " exceeds pool of " + std::to_string(pool.samples.size()));
    }
    subsets.emplace(size, pool.head(size));
    for (int rep = 0; rep < reps_per_size; ++rep, ++ordinal) {
      SweepCell cell;
      cell.kind = kind;
      cell.train_size = size;
      cell.rep = rep;
      cell.model_seed = derive_seed(tc.seed, ordinal);
      cells.push_back(cell);
    }
  }

  const auto run_cell = [&](SweepCell& cell) {
    int layers = 0, dim = 0;
    default_dims(kind, layers, dim);
    Model model = build_model(kind, pool.cfg, layers, dim, cell.model_seed);
    TrainConfig cell_tc = tc;
    cell_tc.train_size = cell.train_size;
    const TrainResult tr = train(model, subsets.at(cell.train_size), cell_tc);
    cell.final_mse = tr.mse_history.empty() ? 0.0 : tr.mse_history.back();
    cell.perf_ratio = performance_ratio(model, test_set);
  };

  if (jobs == 1 || cells.size() <= 1) {
    for (auto& cell : cells) run_cell(cell);
    return cells;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  std::mutex err_mutex;
  std::string first_error;
  const int nworkers = std::min<int>(jobs, static_cast<int>(cells.size()));
  for (int w = 0; w < nworkers; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
        try {
          run_cell(cells[i]);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (first_error.empty()) first_error = e.what();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (!first_error.empty()) throw std::runtime_error("sweep(): " + first_error);
  return cells;
}

int minimal_size(const std::vector<SweepCell>& cells, double target) {
  // Collect mean ratio per size, then return the smallest size at target.
  std::vector<std::pair<int, std::pair<double, int>>> agg;  // size -> (sum, count)
  for (const auto& c : cells) {
    auto it = std::find_if(agg.begin(), agg.end(),
                           [&](const auto& e) { return e.first == c.train_size; });
    if (it == agg.end())
      agg.push_back({c.train_size, {c.perf_ratio, 1}});
    else {
      it->second.first += c.perf_ratio;
      it->second.second += 1;
    }
  }
  int best = -1;
  for (const auto& [size, sc] : agg) {
    const double mean = sc.first / sc.second;
    if (mean >= target && (best < 0 || size < best)) best = size;
  }
  return best;
}

void save_sweep_csv(const std::vector<SweepCell>& cells, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "model,train_size,rep,model_seed,perf_ratio,final_mse\n";
  for (const auto& c : cells) {
    out << to_string(c.kind) << "," << c.train_size << "," << c.rep << "," << c.model_seed
        << "," << c.perf_ratio << "," << c.final_mse << "\n";
  }
}

}  // namespace wig
