#include "crm/energy_model.hpp"

#include <cmath>

#include "crm/rng.hpp"
#include "crm/util.hpp"

namespace crm {

int FeatureMap::output_dim() const {
  switch (kind) {
    case FeatureKind::kIdentity:
      return input_dim;
    case FeatureKind::kIdentityQuad:
      return input_dim + 1;
    case FeatureKind::kMlp:
      return static_cast<int>(w1.rows());
  }
  return 0;
}

Eigen::VectorXd FeatureMap::forward(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim) {
    throw Error(Error::Code::kInvalidArgument,
                "input dimension mismatch in feature map");
  }
  switch (kind) {
    case FeatureKind::kIdentity:
      return x;
    case FeatureKind::kIdentityQuad: {
      Eigen::VectorXd phi(input_dim + 1);
      phi.head(input_dim) = x;
      phi[input_dim] = x.squaredNorm();
      return phi;
    }
    case FeatureKind::kMlp:
      return (w1 * x + b1).array().tanh().matrix();
  }
  return {};
}

Eigen::MatrixXd FeatureMap::forward_batch(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim) {
    throw Error(Error::Code::kInvalidArgument,
                "input dimension mismatch in feature map");
  }
  switch (kind) {
    case FeatureKind::kIdentity:
      return x;
    case FeatureKind::kIdentityQuad: {
      Eigen::MatrixXd phi(x.rows(), input_dim + 1);
      phi.leftCols(input_dim) = x;
      phi.col(input_dim) = x.rowwise().squaredNorm();
      return phi;
    }
    case FeatureKind::kMlp:
      return ((x * w1.transpose()).rowwise() + b1.transpose())
          .array()
          .tanh()
          .matrix();
  }
  return {};
}

int EnergyModel::num_parameters() const {
  int n = static_cast<int>(head.size()) + static_cast<int>(bias.size());
  if (feature_map.kind == FeatureKind::kMlp) {
    n += static_cast<int>(feature_map.w1.size()) +
         static_cast<int>(feature_map.b1.size());
  }
  return n;
}

EnergyModel init_energy_model(const AttributeSpec& attr, int input_dim,
                              FeatureKind kind, int hidden_width,
                              const GroupSet& train_support,
                              const Eigen::VectorXd& log_prior,
                              std::uint64_t seed) {
  if (train_support.empty()) {
    throw Error(Error::Code::kEmptySupport, "train support is empty");
  }
  if (log_prior.size() != train_support.size()) {
    throw Error(Error::Code::kSupportMismatch,
                "log prior does not match the train support");
  }
  constexpr double kInitScale = 0.01;
  Rng rng(seed, "model-init");

  EnergyModel model;
  model.attr = attr;
  model.input_dim = input_dim;
  model.feature_map.kind = kind;
  model.feature_map.input_dim = input_dim;
  if (kind == FeatureKind::kMlp) {
    model.feature_map.w1.resize(hidden_width, input_dim);
    model.feature_map.b1 = Eigen::VectorXd::Zero(hidden_width);
    for (int r = 0; r < hidden_width; ++r) {
      for (int c = 0; c < input_dim; ++c) {
        model.feature_map.w1(r, c) = kInitScale * rng.next_gaussian();
      }
    }
  }
  const int h = model.feature_map.output_dim();
  model.head.resize(attr.total_onehot_len(), h);
  for (int r = 0; r < model.head.rows(); ++r) {
    for (int c = 0; c < h; ++c) {
      model.head(r, c) = kInitScale * rng.next_gaussian();
    }
  }
  model.train_support = train_support;
  model.bias = Eigen::VectorXd::Zero(train_support.size());
  model.log_prior = log_prior;
  return model;
}

EnergyModel analytic_energy_model(const GaussianAedSpec& aed,
                                  const GroupSet& support,
                                  const Eigen::VectorXd& prior) {
  if (support.empty() || prior.size() != support.size()) {
    throw Error(Error::Code::kSupportMismatch,
                "prior does not match the support");
  }
  const double gamma = aed.energy_scale;
  const int m = aed.attr.num_attributes();
  const int n = aed.ambient_dim;

  EnergyModel model;
  model.attr = aed.attr;
  model.input_dim = n;
  model.feature_map.kind = FeatureKind::kIdentityQuad;
  model.feature_map.input_dim = n;
  // Row r encodes gamma * (||x||^2 - 2 mu_r' x); the per-row constant
  // gamma * ||mu_r||^2 is group-additive and lives in the bias table.
  model.head.resize(aed.attr.total_onehot_len(), n + 1);
  for (int r = 0; r < model.head.rows(); ++r) {
    model.head.row(r).head(n) = -2.0 * gamma * aed.means.row(r);
    model.head(r, n) = gamma;
  }
  model.train_support = support;
  model.bias.resize(support.size());
  model.log_prior.resize(support.size());
  for (int i = 0; i < support.size(); ++i) {
    model.bias[i] = gamma * m * aed.group_mean(support.at(i)).squaredNorm();
    model.log_prior[i] =
        prior[i] > 0.0 ? std::log(prior[i])
                       : -std::numeric_limits<double>::infinity();
  }
  return model;
}

Eigen::VectorXd energies(const EnergyModel& model, const Eigen::VectorXd& x) {
  return model.head * model.feature_map.forward(x);
}

Eigen::VectorXd energy_group_sums(const Eigen::VectorXd& energy_vector,
                                  const AttributeSpec& attr) {
  if (energy_vector.size() != attr.total_onehot_len()) {
    throw Error(Error::Code::kInvalidArgument,
                "energy vector length does not match the spec");
  }
  Eigen::VectorXd sums =
      energy_vector.segment(attr.block_offset(0), attr.cardinality(0));
  for (int i = 1; i < attr.num_attributes(); ++i) {
    const int d = attr.cardinality(i);
    const auto block = energy_vector.segment(attr.block_offset(i), d);
    Eigen::VectorXd next(sums.size() * d);
    for (Eigen::Index a = 0; a < sums.size(); ++a) {
      next.segment(a * d, d) = block.array() + sums[a];
    }
    sums.swap(next);
  }
  return sums;
}

LogitTable train_logits(const EnergyModel& model, const Eigen::VectorXd& x) {
  const Eigen::VectorXd grid =
      energy_group_sums(energies(model, x), model.attr);
  LogitTable table;
  table.support = &model.train_support;
  table.values.resize(model.train_support.size());
  for (int k = 0; k < model.train_support.size(); ++k) {
    const std::int64_t flat = model.attr.flat_index(model.train_support.at(k));
    table.values[k] = -grid[flat] + model.log_prior[k] - model.bias[k];
  }
  return table;
}

Eigen::VectorXd log_posterior_train(const EnergyModel& model,
                                    const Eigen::VectorXd& x) {
  return log_softmax(train_logits(model, x).values);
}

std::vector<int> support_indices(const GroupSet& support,
                                 const std::vector<Group>& labels) {
  std::vector<int> indices;
  indices.reserve(labels.size());
  for (const Group& g : labels) {
    const int idx = support.index_of(g);
    if (idx < 0) {
      throw Error(Error::Code::kSupportMismatch,
                  "label " + to_string(g) + " outside the train support");
    }
    indices.push_back(idx);
  }
  return indices;
}

namespace {

/// K x L indicator with sigma(z_k) as rows, for the support groups.
Eigen::MatrixXd support_encoding_matrix(const GroupSet& support,
                                        const AttributeSpec& attr) {
  Eigen::MatrixXd sigma =
      Eigen::MatrixXd::Zero(support.size(), attr.total_onehot_len());
  for (int k = 0; k < support.size(); ++k) {
    const Group& z = support.at(k);
    for (int i = 0; i < attr.num_attributes(); ++i) {
      sigma(k, attr.block_offset(i) + z.values[i]) = 1.0;
    }
  }
  return sigma;
}

}  // namespace

LossResult nll_loss(const EnergyModel& model, const Eigen::MatrixXd& batch_x,
                    const std::vector<int>& label_indices) {
  const auto batch = static_cast<int>(batch_x.rows());
  if (batch == 0 || label_indices.size() != static_cast<std::size_t>(batch)) {
    throw Error(Error::Code::kInvalidArgument,
                "batch features and labels disagree");
  }
  const int k_groups = model.train_support.size();
  const Eigen::MatrixXd sigma =
      support_encoding_matrix(model.train_support, model.attr);

  const Eigen::MatrixXd phi = model.feature_map.forward_batch(batch_x);
  const Eigen::MatrixXd energy = phi * model.head.transpose();  // batch x L
  Eigen::MatrixXd logits = -(energy * sigma.transpose());       // batch x K
  logits.rowwise() += (model.log_prior - model.bias).transpose();

  // Row-wise stable log-softmax.
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  const Eigen::MatrixXd shifted = logits.colwise() - row_max;
  const Eigen::VectorXd lse =
      shifted.array().exp().rowwise().sum().log().matrix() + row_max;

  double loss = 0.0;
  for (int s = 0; s < batch; ++s) {
    loss += lse[s] - logits(s, label_indices[s]);
  }
  loss /= batch;

  // d loss / d logits = (softmax - onehot) / batch
  Eigen::MatrixXd dlogits =
      (shifted.array().exp().colwise() /
       shifted.array().exp().rowwise().sum())
          .matrix();
  for (int s = 0; s < batch; ++s) dlogits(s, label_indices[s]) -= 1.0;
  dlogits /= batch;

  LossResult result;
  result.loss = loss;
  result.grads.d_bias = -dlogits.colwise().sum().transpose();
  const Eigen::MatrixXd denergy = -(dlogits * sigma);  // batch x L
  result.grads.d_head = denergy.transpose() * phi;
  if (model.feature_map.kind == FeatureKind::kMlp) {
    Eigen::MatrixXd dphi = denergy * model.head;  // batch x hidden
    dphi.array() *= (1.0 - phi.array().square());
    result.grads.d_w1 = dphi.transpose() * batch_x;
    result.grads.d_b1 = dphi.colwise().sum().transpose();
  }
  if (!std::isfinite(loss)) {
    throw Error(Error::Code::kTrainingDiverged, "non-finite loss");
  }
  return result;
}

Eigen::VectorXd log_prior_from_counts(const std::vector<Group>& labels,
                                      const GroupSet& support) {
  const Eigen::VectorXd prior = empirical_prior(labels, support);
  Eigen::VectorXd log_prior(prior.size());
  for (int i = 0; i < prior.size(); ++i) {
    log_prior[i] = prior[i] > 0.0
                       ? std::log(prior[i])
                       : -std::numeric_limits<double>::infinity();
  }
  return log_prior;
}

}  // namespace crm
