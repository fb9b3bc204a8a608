// SPDX-License-Identifier: Apache-2.0
#include "wig/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace wig {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::FCDNN: return "fcdnn";
    case ModelKind::HOMOGNN: return "homognn";
    case ModelKind::HETGNN: return "hetgnn";
    case ModelKind::PGNN: return "pgnn";
  }
  throw std::logic_error("to_string: bad ModelKind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "fcdnn") return ModelKind::FCDNN;
  if (name == "homognn") return ModelKind::HOMOGNN;
  if (name == "hetgnn") return ModelKind::HETGNN;
  if (name == "pgnn") return ModelKind::PGNN;
  throw std::invalid_argument("unknown model kind: " + name);
}

void default_dims(ModelKind kind, int& hidden_layers, int& hidden_dim) {
  hidden_layers = 1;
  switch (kind) {
    case ModelKind::FCDNN: hidden_dim = 200; break;
    case ModelKind::HOMOGNN: hidden_dim = 10; break;
    case ModelKind::HETGNN:
    case ModelKind::PGNN: hidden_dim = 5; break;
  }
}

int Model::param_count() const {
  int total = 0;
  for (const auto& group : tied_groups)
    total += static_cast<int>(params[static_cast<std::size_t>(group.front())].value.size());
  return total;
}

int Model::param_index(const std::string& name) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return static_cast<int>(i);
  throw std::invalid_argument("no parameter named " + name);
}

namespace {

/// Expected feature magnitudes implied by the ZF geometry: a direct link's
/// squared magnitude concentrates around (antennas - users + 1), a cross link
/// into a BS with N beams around N. Aggregating blocks see sums of such
/// entries, so their effective fan-in grows with both the term count and the
/// term magnitude; using these estimates keeps pre-activations O(1) without
/// standardizing the inputs.
struct FeatureScales {
  double p2 = 1.0;       // mean squared budget
  double mu2_dir = 1.0;  // E[h^2], direct links
  double mu_dir = 1.0;   // ~E[h], direct links
  double a_bs_own = 1.0; // E[sum of own-user channels at a BS]
  double a_bs_oth = 1.0; // E[sum of other-user channels at a BS]
  double a_ue_oth = 1.0; // E[sum of a user's channels to the other BSs]
  double nbar = 1.0;     // users per cell, averaged
  double v2_homo = 1.0;  // squared norm of a homogeneous vertex feature
  double fan_p_homo = 1.0;  // squared norm of summed incoming edge features
  double fan_fc = 1.0;      // squared norm of the flattened input
};

FeatureScales feature_scales(const NetworkConfig& cfg) {
  const int m_count = cfg.cell_count();
  const int k_count = cfg.user_count();
  FeatureScales fs;
  fs.p2 = cfg.p_max.array().square().mean();
  fs.nbar = static_cast<double>(k_count) / m_count;

  double dir2 = 0.0, dir1 = 0.0, oth = 0.0, fanp = 0.0, ue_oth = 0.0, cross_total = 0.0;
  for (int m = 0; m < m_count; ++m) {
    const int users = cfg.users_in_cell(m);
    const double d = cfg.antennas_at(m) - users + 1;
    dir2 += users * d;
    dir1 += users * std::sqrt(d);
    oth += (k_count - users) * std::sqrt(static_cast<double>(users));
    cross_total += (k_count - users) * users;
    double sum_other = 0.0;
    for (int l = 0; l < m_count; ++l)
      if (l != m) sum_other += std::sqrt(static_cast<double>(cfg.users_in_cell(l)));
    ue_oth += (static_cast<double>(users) / k_count) * sum_other;
    fanp += users * sum_other * sum_other;
  }
  fs.mu2_dir = dir2 / k_count;
  fs.mu_dir = dir1 / k_count;
  fs.a_bs_own = dir1 / m_count;
  fs.a_bs_oth = oth / m_count;
  fs.a_ue_oth = ue_oth;
  fs.v2_homo = fs.p2 + dir2 / m_count;
  fs.fan_p_homo = fanp / m_count;
  fs.fan_fc = m_count * fs.p2 + dir2 + cross_total;
  return fs;
}

// Hidden-layer initialization constants. The sign-normalized optimizers move
// each weight by at most ~(sum of learning rates) over a run, so the starting
// point has to be close: a positive bias keeps every rectified unit initially
// active, and a gain above the variance-preserving bound spreads the hidden
// features so the output layer needs less weight growth to saturate.
constexpr double kHiddenGain = 2.0;
constexpr double kHiddenBias = 0.5;

struct Builder {
  Model& model;
  std::mt19937_64 rng;

  Builder(Model& m) : model(m), rng(m.seed) {}

  int add(const std::string& name, int in, int out, double fan_in, double gain = 1.0) {
    const double bound = gain * std::sqrt(6.0 / (fan_in + out));
    std::uniform_real_distribution<double> unif(-bound, bound);
    Matrix w(in, out);
    for (Index r = 0; r < in; ++r)
      for (Index c = 0; c < out; ++c) w(r, c) = unif(rng);
    model.params.push_back({name, std::move(w)});
    const int idx = static_cast<int>(model.params.size()) - 1;
    model.tied_groups.push_back({idx});
    return idx;
  }

  int add_const(const std::string& name, int out, double value) {
    model.params.push_back({name, Matrix::Constant(1, out, value)});
    const int idx = static_cast<int>(model.params.size()) - 1;
    model.tied_groups.push_back({idx});
    return idx;
  }

  /// Stores a copy of `src` under `name` and ties the two into one group.
  int add_tied_copy(const std::string& name, int src) {
    model.params.push_back({name, model.params[static_cast<std::size_t>(src)].value});
    const int idx = static_cast<int>(model.params.size()) - 1;
    for (auto& group : model.tied_groups)
      for (int member : group)
        if (member == src) {
          group.push_back(idx);
          return idx;
        }
    throw std::logic_error("add_tied_copy: source not grouped");
  }
};

std::string layer_tag(int layer, int hidden_layers) {
  return layer == hidden_layers ? "out" : "l" + std::to_string(layer);
}

void build_het_or_pgnn(Model& m, const FeatureScales& fs) {
  const bool tied = m.kind == ModelKind::HETGNN;
  const int m_count = m.cfg.cell_count();
  const int k_count = m.cfg.user_count();
  Builder b(m);
  // In-cell/cross-cell splits collapse when the aggregators are tied, so the
  // tied blocks see the union of both term sets.
  const double own_u = tied ? k_count : fs.nbar;
  const double oth_u = tied ? k_count : k_count - fs.nbar;
  const double own_h = tied ? fs.a_bs_own + fs.a_bs_oth : fs.a_bs_own;
  const double oth_h = tied ? fs.a_bs_own + fs.a_bs_oth : fs.a_bs_oth;
  const double serv_b = tied ? m_count : 1.0;
  const double oth_b = tied ? m_count : m_count - 1.0;
  const double serv_h = tied ? fs.mu_dir + fs.a_ue_oth : fs.mu_dir;
  const double oth_h_ue = tied ? fs.mu_dir + fs.a_ue_oth : fs.a_ue_oth;

  for (int l = 0; l <= m.hidden_layers; ++l) {
    const std::string tag = layer_tag(l, m.hidden_layers);
    const bool is_out = l == m.hidden_layers;
    const bool has_u_state = l > 0;  // the input layer gives UEs no state
    const int b_in = l == 0 ? 1 : m.hidden_dim;
    const int u_in = m.hidden_dim;  // only read when has_u_state
    const int out = is_out ? 1 : m.hidden_dim;
    const double state2 = l == 0 ? fs.p2 : 1.0;
    const double gain = is_out ? 1.0 : kHiddenGain;
    const double bias = is_out ? 0.0 : kHiddenBias;

    b.add(tag + ".bs.S", b_in, out, b_in * state2, gain);
    if (has_u_state) {
      const int bv = b.add(tag + ".bs.BV", u_in, out, u_in * own_u * own_u, gain);
      if (tied)
        b.add_tied_copy(tag + ".bs.CV", bv);
      else
        b.add(tag + ".bs.CV", u_in, out, u_in * oth_u * oth_u, gain);
    }
    const int bp = b.add(tag + ".bs.BP", 1, out, own_h * own_h, gain);
    if (tied)
      b.add_tied_copy(tag + ".bs.CP", bp);
    else
      b.add(tag + ".bs.CP", 1, out, oth_h * oth_h, gain);
    b.add_const(tag + ".bs.b", out, bias);

    if (is_out) break;  // the output layer is BS-side only

    if (has_u_state) b.add(tag + ".ue.T", u_in, out, u_in, gain);
    const int bu = b.add(tag + ".ue.BU", b_in, out, b_in * serv_b * serv_b * state2, gain);
    if (tied)
      b.add_tied_copy(tag + ".ue.CU", bu);
    else
      b.add(tag + ".ue.CU", b_in, out, b_in * oth_b * oth_b * state2, gain);
    const int bq = b.add(tag + ".ue.BQ", 1, out, serv_h * serv_h, gain);
    if (tied)
      b.add_tied_copy(tag + ".ue.CQ", bq);
    else
      b.add(tag + ".ue.CQ", 1, out, oth_h_ue * oth_h_ue, gain);
    b.add_const(tag + ".ue.b", out, bias);
  }
}

void build_homognn(Model& m, const FeatureScales& fs) {
  const int m_count = m.cfg.cell_count();
  int max_n = 0;
  for (int i = 0; i < m_count; ++i) max_n = std::max(max_n, m.cfg.users_in_cell(i));
  const int fv = 1 + max_n;
  Builder b(m);
  for (int l = 0; l <= m.hidden_layers; ++l) {
    const std::string tag = layer_tag(l, m.hidden_layers);
    const bool is_out = l == m.hidden_layers;
    const int in = l == 0 ? fv : m.hidden_dim;
    const int out = is_out ? 1 : m.hidden_dim;
    const double self2 = l == 0 ? fs.v2_homo : in;
    const double gain = is_out ? 1.0 : kHiddenGain;
    b.add(tag + ".S", in, out, self2, gain);
    b.add(tag + ".V", in, out, self2 * (m_count - 1.0) * (m_count - 1.0), gain);
    b.add(tag + ".P", max_n, out, fs.fan_p_homo, gain);
    b.add_const(tag + ".b", out, is_out ? 0.0 : kHiddenBias);
  }
}

void build_fcdnn(Model& m, const FeatureScales& fs) {
  const int m_count = m.cfg.cell_count();
  const int k_count = m.cfg.user_count();
  const int flat = m_count + k_count * m_count;
  Builder b(m);
  for (int l = 0; l <= m.hidden_layers; ++l) {
    const std::string tag = layer_tag(l, m.hidden_layers);
    const bool is_out = l == m.hidden_layers;
    const int in = l == 0 ? flat : m.hidden_dim;
    const int out = is_out ? m_count : m.hidden_dim;
    b.add(tag + ".W", in, out, l == 0 ? fs.fan_fc : in);
    b.add_const(tag + ".b", out, 0.0);
  }
}

}  // namespace

Model build_model(ModelKind kind, const NetworkConfig& cfg, int hidden_layers, int hidden_dim,
                  std::uint64_t seed) {
  cfg.validate();
  if (hidden_layers < 1) throw std::invalid_argument("build_model: need at least one hidden layer");
  if (hidden_dim < 1) throw std::invalid_argument("build_model: hidden_dim must be positive");

  Model m;
  m.kind = kind;
  m.cfg = cfg;
  m.hidden_layers = hidden_layers;
  m.hidden_dim = hidden_dim;
  m.seed = seed;
  const FeatureScales fs = feature_scales(cfg);
  switch (kind) {
    case ModelKind::PGNN:
    case ModelKind::HETGNN: build_het_or_pgnn(m, fs); break;
    case ModelKind::HOMOGNN: build_homognn(m, fs); break;
    case ModelKind::FCDNN: build_fcdnn(m, fs); break;
  }
  return m;
}

namespace {

Matrix seg_sum(const Matrix& x, const std::vector<int>& seg, int out_rows) {
  Matrix out = Matrix::Zero(out_rows, x.cols());
  for (std::size_t i = 0; i < seg.size(); ++i) out.row(seg[i]) += x.row(static_cast<Index>(i));
  return out;
}

Matrix take_rows(const Matrix& x, const std::vector<int>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

Matrix sigmoid_of(const Matrix& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

void check_layer_finite(const Matrix& x, ModelKind kind, const std::string& where) {
  if (!x.allFinite())
    throw std::runtime_error(to_string(kind) + " forward: non-finite activations in " + where);
}

/// Batched forward shared by all kinds, plain Eigen. Returns the normalized
/// output (sigmoid, before p_max scaling). forward_on_tape mirrors this
/// computation op for op; a unit test holds the two paths equal.
Matrix forward_batch(const Model& m, const BatchFeatures& fb) {
  auto P = [&m](const std::string& name) -> const Matrix& {
    return m.params[static_cast<std::size_t>(m.param_index(name))].value;
  };

  if (m.kind == ModelKind::FCDNN) {
    Matrix x = fb.flat_in;
    for (int l = 0; l < m.hidden_layers; ++l) {
      const std::string tag = layer_tag(l, m.hidden_layers);
      Matrix z = x * P(tag + ".W");
      z.rowwise() += P(tag + ".b").row(0);
      x = z.cwiseMax(0.0);
      check_layer_finite(x, m.kind, "layer " + std::to_string(l + 1));
    }
    Matrix z = x * P("out.W");
    z.rowwise() += P("out.b").row(0);
    check_layer_finite(z, m.kind, "output layer");
    return sigmoid_of(z);
  }

  if (m.kind == ModelKind::HOMOGNN) {
    Matrix x = fb.vertex_feat;
    for (int l = 0; l <= m.hidden_layers; ++l) {
      const std::string tag = layer_tag(l, m.hidden_layers);
      const Matrix tot = take_rows(seg_sum(x, fb.cell_to_graph, fb.n), fb.cell_to_graph);
      Matrix z = x * P(tag + ".S") + (tot - x) * P(tag + ".V") + fb.edge_in_sum * P(tag + ".P");
      z.rowwise() += P(tag + ".b").row(0);
      if (l == m.hidden_layers) {
        check_layer_finite(z, m.kind, "output layer");
        return sigmoid_of(z);
      }
      x = z.cwiseMax(0.0);
      check_layer_finite(x, m.kind, "layer " + std::to_string(l + 1));
    }
    throw std::logic_error("forward_batch: unreachable");
  }

  // PGNN and the vanilla heterogeneous GNN share one dataflow; tying the
  // aggregator pairs is a property of the stored values, not of the graph.
  Matrix B = fb.pmax_col;
  Matrix U;
  for (int l = 0; l <= m.hidden_layers; ++l) {
    const std::string tag = layer_tag(l, m.hidden_layers);
    const bool has_u = l > 0;
    Matrix zb = B * P(tag + ".bs.S") + fb.hown * P(tag + ".bs.BP") + fb.hother * P(tag + ".bs.CP");
    if (has_u) {
      const Matrix cell_u = seg_sum(U, fb.user_to_cell, fb.bs_rows);
      const Matrix tot_u = take_rows(seg_sum(U, fb.user_to_graph, fb.n), fb.cell_to_graph);
      zb += cell_u * P(tag + ".bs.BV") + (tot_u - cell_u) * P(tag + ".bs.CV");
    }
    zb.rowwise() += P(tag + ".bs.b").row(0);
    if (l == m.hidden_layers) {
      check_layer_finite(zb, m.kind, "output layer");
      return sigmoid_of(zb);
    }

    // Both sides read the previous layer's states.
    const Matrix serv_b = take_rows(B, fb.user_to_cell);
    const Matrix tot_b = take_rows(seg_sum(B, fb.cell_to_graph, fb.n), fb.user_to_graph);
    Matrix zu = serv_b * P(tag + ".ue.BU") + (tot_b - serv_b) * P(tag + ".ue.CU") +
                fb.hserv * P(tag + ".ue.BQ") + fb.hrow_other * P(tag + ".ue.CQ");
    if (has_u) zu += U * P(tag + ".ue.T");
    zu.rowwise() += P(tag + ".ue.b").row(0);

    B = zb.cwiseMax(0.0);
    U = zu.cwiseMax(0.0);
    check_layer_finite(B, m.kind, "layer " + std::to_string(l + 1));
    check_layer_finite(U, m.kind, "layer " + std::to_string(l + 1));
  }
  throw std::logic_error("forward_batch: unreachable");
}

}  // namespace

BatchFeatures prepare_batch(const Model& model, const std::vector<LabeledSample>& samples,
                            bool with_labels) {
  const NetworkConfig& cfg = model.cfg;
  const int m_count = cfg.cell_count();
  const int k_count = cfg.user_count();
  const int n = static_cast<int>(samples.size());
  if (n == 0) throw std::invalid_argument("prepare_batch: empty batch");

  BatchFeatures fb;
  fb.n = n;
  fb.bs_rows = n * m_count;
  fb.user_rows = n * k_count;
  for (const LabeledSample& s : samples) {
    if (s.h.rows() != k_count || s.h.cols() != m_count || s.p_max.size() != m_count)
      throw std::invalid_argument("prepare_batch: sample shape does not match model config");
    if (with_labels && s.p_star.size() != m_count)
      throw std::invalid_argument("prepare_batch: missing labels");
  }

  fb.user_to_cell.reserve(static_cast<std::size_t>(fb.user_rows));
  fb.user_to_graph.reserve(static_cast<std::size_t>(fb.user_rows));
  fb.cell_to_graph.reserve(static_cast<std::size_t>(fb.bs_rows));
  for (int s = 0; s < n; ++s) {
    for (int m = 0; m < m_count; ++m) {
      fb.cell_to_graph.push_back(s);
      for (int u = 0; u < cfg.users_in_cell(m); ++u) {
        fb.user_to_cell.push_back(s * m_count + m);
        fb.user_to_graph.push_back(s);
      }
    }
  }

  const double inv_h = 1.0 / model.h_scale;
  const bool gnn = model.kind != ModelKind::FCDNN;
  const bool het = model.kind == ModelKind::PGNN || model.kind == ModelKind::HETGNN;

  if (gnn) {
    fb.pmax_col.resize(fb.bs_rows, 1);
    for (int s = 0; s < n; ++s) fb.pmax_col.col(0).segment(s * m_count, m_count) = samples[s].p_max;
  }
  if (het) {
    fb.hown.resize(fb.bs_rows, 1);
    fb.hother.resize(fb.bs_rows, 1);
    fb.hserv.resize(fb.user_rows, 1);
    fb.hrow_other.resize(fb.user_rows, 1);
    for (int s = 0; s < n; ++s) {
      const Matrix h = samples[s].h * inv_h;
      const Vector col_tot = h.colwise().sum();
      int k = 0;
      for (int m = 0; m < m_count; ++m) {
        double own = 0.0;
        for (int u = 0; u < cfg.users_in_cell(m); ++u) {
          const int kk = k + u;
          const double serv = h(kk, m);
          own += serv;
          fb.hserv(s * k_count + kk, 0) = serv;
          fb.hrow_other(s * k_count + kk, 0) = h.row(kk).sum() - serv;
        }
        fb.hown(s * m_count + m, 0) = own;
        fb.hother(s * m_count + m, 0) = col_tot[m] - own;
        k += cfg.users_in_cell(m);
      }
    }
  }
  if (model.kind == ModelKind::HOMOGNN) {
    int max_n = 0;
    for (int m = 0; m < m_count; ++m) max_n = std::max(max_n, cfg.users_in_cell(m));
    fb.vertex_feat = Matrix::Zero(fb.bs_rows, 1 + max_n);
    fb.edge_in_sum = Matrix::Zero(fb.bs_rows, max_n);
    for (int s = 0; s < n; ++s) {
      const Matrix h = samples[s].h * inv_h;
      int k = 0;
      for (int m = 0; m < m_count; ++m) {
        const int row = s * m_count + m;
        fb.vertex_feat(row, 0) = samples[s].p_max[m];
        for (int u = 0; u < cfg.users_in_cell(m); ++u) {
          fb.vertex_feat(row, 1 + u) = h(k + u, m);
          // Incoming edges carry this user's channels to every other BS.
          fb.edge_in_sum(row, u) = h.row(k + u).sum() - h(k + u, m);
        }
        k += cfg.users_in_cell(m);
      }
    }
  }
  if (model.kind == ModelKind::FCDNN) {
    fb.flat_in.resize(n, m_count + k_count * m_count);
    for (int s = 0; s < n; ++s) {
      fb.flat_in.row(s).head(m_count) = samples[s].p_max;
      for (int k = 0; k < k_count; ++k)
        for (int m = 0; m < m_count; ++m)
          fb.flat_in(s, m_count + k * m_count + m) = samples[s].h(k, m) * inv_h;
    }
  }

  if (with_labels) {
    if (model.kind == ModelKind::FCDNN) {
      fb.labels_norm.resize(n, m_count);
      for (int s = 0; s < n; ++s)
        fb.labels_norm.row(s) = (samples[s].p_star.array() / samples[s].p_max.array()).transpose();
    } else {
      fb.labels_norm.resize(fb.bs_rows, 1);
      for (int s = 0; s < n; ++s)
        fb.labels_norm.col(0).segment(s * m_count, m_count) =
            samples[s].p_star.array() / samples[s].p_max.array();
    }
  }
  return fb;
}

Vector Model::forward(const Vector& p_max, const Matrix& h) const {
  LabeledSample s;
  s.p_max = p_max;
  s.h = h;
  const BatchFeatures fb = prepare_batch(*this, {s}, false);
  const Matrix out = forward_batch(*this, fb);
  if (kind == ModelKind::FCDNN) return out.row(0).transpose().cwiseProduct(p_max);
  return out.col(0).cwiseProduct(p_max);
}

ad::Var forward_on_tape(const Model& m, const BatchFeatures& fb, ad::Tape& tape,
                        std::vector<ad::Var>& group_leaves) {
  group_leaves.clear();
  std::vector<ad::Var> by_param(m.params.size());
  for (const auto& group : m.tied_groups) {
    const ad::Var leaf = tape.leaf(m.params[static_cast<std::size_t>(group.front())].value, true);
    group_leaves.push_back(leaf);
    for (int idx : group) by_param[static_cast<std::size_t>(idx)] = leaf;
  }
  auto P = [&](const std::string& name) { return by_param[static_cast<std::size_t>(m.param_index(name))]; };
  auto with_bias = [&](ad::Var z, const std::string& name, int rows) {
    return tape.add(z, tape.broadcast_rows(P(name), rows));
  };

  if (m.kind == ModelKind::FCDNN) {
    ad::Var x = tape.leaf(fb.flat_in);
    for (int l = 0; l < m.hidden_layers; ++l) {
      const std::string tag = layer_tag(l, m.hidden_layers);
      x = tape.relu(with_bias(tape.matmul(x, P(tag + ".W")), tag + ".b", fb.n));
    }
    return tape.sigmoid(with_bias(tape.matmul(x, P("out.W")), "out.b", fb.n));
  }

  if (m.kind == ModelKind::HOMOGNN) {
    ad::Var x = tape.leaf(fb.vertex_feat);
    const ad::Var edge = tape.leaf(fb.edge_in_sum);
    for (int l = 0; l <= m.hidden_layers; ++l) {
      const std::string tag = layer_tag(l, m.hidden_layers);
      const ad::Var tot =
          tape.gather_rows(tape.segment_sum(x, fb.cell_to_graph, fb.n), fb.cell_to_graph);
      ad::Var z = tape.add(tape.matmul(x, P(tag + ".S")),
                           tape.matmul(tape.sub(tot, x), P(tag + ".V")));
      z = tape.add(z, tape.matmul(edge, P(tag + ".P")));
      z = with_bias(z, tag + ".b", fb.bs_rows);
      if (l == m.hidden_layers) return tape.sigmoid(z);
      x = tape.relu(z);
    }
    throw std::logic_error("forward_on_tape: unreachable");
  }

  ad::Var B = tape.leaf(fb.pmax_col);
  const ad::Var hown = tape.leaf(fb.hown);
  const ad::Var hother = tape.leaf(fb.hother);
  const ad::Var hserv = tape.leaf(fb.hserv);
  const ad::Var hrow_other = tape.leaf(fb.hrow_other);
  ad::Var U;
  for (int l = 0; l <= m.hidden_layers; ++l) {
    const std::string tag = layer_tag(l, m.hidden_layers);
    const bool has_u = l > 0;
    ad::Var zb = tape.add(tape.matmul(B, P(tag + ".bs.S")),
                          tape.add(tape.matmul(hown, P(tag + ".bs.BP")),
                                   tape.matmul(hother, P(tag + ".bs.CP"))));
    if (has_u) {
      const ad::Var cell_u = tape.segment_sum(U, fb.user_to_cell, fb.bs_rows);
      const ad::Var tot_u =
          tape.gather_rows(tape.segment_sum(U, fb.user_to_graph, fb.n), fb.cell_to_graph);
      zb = tape.add(zb, tape.add(tape.matmul(cell_u, P(tag + ".bs.BV")),
                                 tape.matmul(tape.sub(tot_u, cell_u), P(tag + ".bs.CV"))));
    }
    zb = with_bias(zb, tag + ".bs.b", fb.bs_rows);
    if (l == m.hidden_layers) return tape.sigmoid(zb);

    const ad::Var serv_b = tape.gather_rows(B, fb.user_to_cell);
    const ad::Var tot_b =
        tape.gather_rows(tape.segment_sum(B, fb.cell_to_graph, fb.n), fb.user_to_graph);
    ad::Var zu = tape.add(tape.matmul(serv_b, P(tag + ".ue.BU")),
                          tape.matmul(tape.sub(tot_b, serv_b), P(tag + ".ue.CU")));
    zu = tape.add(zu, tape.add(tape.matmul(hserv, P(tag + ".ue.BQ")),
                               tape.matmul(hrow_other, P(tag + ".ue.CQ"))));
    if (has_u) zu = tape.add(zu, tape.matmul(U, P(tag + ".ue.T")));
    zu = with_bias(zu, tag + ".ue.b", fb.user_rows);

    B = tape.relu(zb);
    U = tape.relu(zu);
  }
  throw std::logic_error("forward_on_tape: unreachable");
}

namespace {

constexpr char kModelMagic[8] = {'W', 'I', 'G', 'M', 'O', 'D', 'L', '1'};
constexpr std::uint64_t kModelFormatVersion = 1;

}  // namespace

void save_model(const Model& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_model: cannot open " + path);

  nlohmann::json header;
  header["format_version"] = kModelFormatVersion;
  header["kind"] = to_string(m.kind);
  header["network"] = m.cfg;
  header["hidden_layers"] = m.hidden_layers;
  header["hidden_dim"] = m.hidden_dim;
  header["seed"] = m.seed;
  header["h_scale"] = m.h_scale;
  auto& blocks = header["blocks"] = nlohmann::json::array();
  for (const ParamBlock& p : m.params)
    blocks.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  header["tied_groups"] = m.tied_groups;
  const std::string text = header.dump();

  os.write(kModelMagic, sizeof kModelMagic);
  const std::uint64_t len = text.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const ParamBlock& p : m.params) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = p.value;
    os.write(reinterpret_cast<const char*>(rm.data()),
             static_cast<std::streamsize>(sizeof(double) * rm.size()));
  }
  if (!os) throw std::runtime_error("save_model: write failed for " + path);
}

Model load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_model: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || !std::equal(magic, magic + sizeof magic, kModelMagic))
    throw std::runtime_error("load_model: not a model checkpoint: " + path);
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("load_model: truncated header in " + path);
  const nlohmann::json header = nlohmann::json::parse(text);
  if (header.at("format_version").get<std::uint64_t>() != kModelFormatVersion)
    throw std::runtime_error("load_model: unsupported format version in " + path);

  Model m;
  m.kind = model_kind_from_string(header.at("kind").get<std::string>());
  m.cfg = header.at("network").get<NetworkConfig>();
  m.cfg.validate();
  m.hidden_layers = header.at("hidden_layers").get<int>();
  m.hidden_dim = header.at("hidden_dim").get<int>();
  m.seed = header.at("seed").get<std::uint64_t>();
  m.h_scale = header.at("h_scale").get<double>();
  m.tied_groups = header.at("tied_groups").get<std::vector<std::vector<int>>>();
  for (const auto& jb : header.at("blocks")) {
    ParamBlock p;
    p.name = jb.at("name").get<std::string>();
    const Index rows = jb.at("rows").get<Index>(), cols = jb.at("cols").get<Index>();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    is.read(reinterpret_cast<char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(double) * rm.size()));
    p.value = rm;
    m.params.push_back(std::move(p));
  }
  if (!is) throw std::runtime_error("load_model: truncated blocks in " + path);
  return m;
}

Matrix assemble_bs_aggregation(const Matrix& B, const Matrix& C,
                               const std::vector<int>& cell_sizes) {
  if (B.rows() != C.rows() || B.cols() != C.cols())
    throw std::invalid_argument("assemble_bs_aggregation: B and C shapes differ");
  const int in = static_cast<int>(B.rows());
  const int out = static_cast<int>(B.cols());
  const int m_count = static_cast<int>(cell_sizes.size());
  int users = 0;
  for (int n : cell_sizes) users += n;
  Matrix w = Matrix::Zero(static_cast<Index>(m_count) * out, static_cast<Index>(users) * in);
  for (int i = 0; i < m_count; ++i) {
    int col = 0;
    for (int j = 0; j < m_count; ++j) {
      const Matrix& mini = i == j ? B : C;
      for (int u = 0; u < cell_sizes[static_cast<std::size_t>(j)]; ++u) {
        w.block(static_cast<Index>(i) * out, col, out, in) = mini.transpose();
        col += in;
      }
    }
  }
  return w;
}

}  // namespace wig
