// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wig/autodiff.hpp"
#include "wig/dataset.hpp"
#include "wig/network.hpp"
#include "wig/types.hpp"

namespace wig {

enum class ModelKind { FCDNN, HOMOGNN, HETGNN, PGNN };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// One stored weight or bias, in right-multiplication orientation: a row of
/// activations x maps to x * value, so value is (in x out). Biases are 1 x out.
struct ParamBlock {
  std::string name;
  Matrix value;
};

/// A built network. Parameter sharing has two levels:
///   - structural: the same block multiplies every position of its pattern
///     (e.g. one mini-matrix for all users of all cells), which is what makes
///     the GNNs equivariant by construction;
///   - tied groups: distinct stored blocks constrained to hold equal values
///     (the vanilla heterogeneous GNN ties its in-cell and cross-cell
///     aggregators). Training updates a group as one variable; checkpoints
///     keep the members separate so structural tampering is detectable.
struct Model {
  ModelKind kind = ModelKind::PGNN;
  NetworkConfig cfg;
  int hidden_layers = 1;
  int hidden_dim = 5;
  std::uint64_t seed = 0;
  /// Divisor applied to H on input; 1.0 unless input standardization is on.
  double h_scale = 1.0;

  std::vector<ParamBlock> params;
  /// Partition of param indices; each group shares one trainable variable,
  /// with group.front() as representative. Untied params form singletons.
  std::vector<std::vector<int>> tied_groups;

  /// Distinct trainable scalars (tied groups counted once).
  int param_count() const;
  int param_index(const std::string& name) const;

  /// Single-instance policy evaluation: p in (0, p_max) element-wise.
  /// Throws std::runtime_error naming the layer if activations go non-finite.
  Vector forward(const Vector& p_max, const Matrix& h) const;
};

/// Constructs the layer stack for `kind`: an input feature layer,
/// `hidden_layers` ReLU layers, and a sigmoid output layer producing one
/// scalar per BS, scaled by p_max. Weights are drawn uniform in
/// +-sqrt(6/(fan_in+fan_out)), where fan_in of an aggregating block accounts
/// for how many terms it sums and for the expected magnitude of the
/// equivalent channels feeding it; biases start at zero.
Model build_model(ModelKind kind, const NetworkConfig& cfg, int hidden_layers, int hidden_dim,
                  std::uint64_t seed);

/// Default hyper-parameters per kind (hidden layers and width).
void default_dims(ModelKind kind, int& hidden_layers, int& hidden_dim);

/// Checkpoint container: magic "WIGMODL1", u64 JSON-header length, JSON header
/// {format_version, kind, network, hidden_layers, hidden_dim, seed, h_scale,
/// blocks, tied_groups}, then each block's doubles row-major little-endian in
/// header order. Byte-identical for identical models.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

/// Inputs of one forward pass over a batch of instances, laid out as one
/// disjoint graph union: BS rows are sample-major ((s,i) -> s*M+i), user rows
/// likewise. Channel aggregates are precomputed per row since they are
/// constants of the pass.
struct BatchFeatures {
  int n = 0;       ///< instances
  int bs_rows = 0;   ///< n * M
  int user_rows = 0; ///< n * K
  std::vector<int> user_to_cell;   ///< global BS row serving each user row
  std::vector<int> user_to_graph;  ///< instance of each user row
  std::vector<int> cell_to_graph;  ///< instance of each BS row

  Matrix pmax_col;    ///< bs_rows x 1
  Matrix hown;        ///< bs_rows x 1: sum of own users' channels into the BS
  Matrix hother;      ///< bs_rows x 1: sum of all other users' channels
  Matrix hserv;       ///< user_rows x 1: channel to the serving BS
  Matrix hrow_other;  ///< user_rows x 1: summed channels to all other BSs

  Matrix vertex_feat;   ///< bs_rows x (1+maxN): [p_max, own channels, 0-pad]
  Matrix edge_in_sum;   ///< bs_rows x maxN: incoming edge features, summed

  Matrix flat_in;  ///< n x (M + K*M): [p_max, H row-major]

  Matrix labels_norm;  ///< normalized labels, same shape as the model output
};

/// Builds the features `model` consumes from `samples` (all shapes must match
/// model.cfg). Labels are filled only when `with_labels`.
BatchFeatures prepare_batch(const Model& model, const std::vector<LabeledSample>& samples,
                            bool with_labels);

/// Records the batched forward pass on `tape` and returns the normalized
/// output (sigmoid, before p_max scaling): bs_rows x 1 for the GNNs, n x M for
/// the fully-connected net. `group_leaves[g]` is the differentiable leaf
/// shared by every member of model.tied_groups[g].
ad::Var forward_on_tape(const Model& model, const BatchFeatures& fb, ad::Tape& tape,
                        std::vector<ad::Var>& group_leaves);

/// Assembles the dense block form of the aggregation operator for structural
/// checks: an M x M grid of sub-matrices, B on the diagonal and C off it, where
/// sub-matrix (i,j) repeats its mini-matrix once per user of cell j. B and C
/// are stored (in x out); the result maps stacked per-user inputs (sum N_j *
/// in columns) to stacked per-BS outputs (M * out rows).
Matrix assemble_bs_aggregation(const Matrix& B, const Matrix& C,
                               const std::vector<int>& cell_sizes);

}  // namespace wig
