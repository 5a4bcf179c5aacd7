#include "crm/crm_adapt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "crm/rng.hpp"
#include "crm/util.hpp"

namespace crm {

namespace {

/// Adam over a list of flat parameter arrays (decoupled weight decay).
class Adam {
 public:
  struct Slot {
    double* param = nullptr;
    const double* grad = nullptr;
    std::ptrdiff_t size = 0;
    bool decay = false;
  };

  explicit Adam(const TrainConfig& config) : config_(config) {}

  void step(const std::vector<Slot>& slots) {
    if (state_m_.empty()) {
      for (const Slot& s : slots) {
        state_m_.emplace_back(Eigen::VectorXd::Zero(s.size));
        state_v_.emplace_back(Eigen::VectorXd::Zero(s.size));
      }
    }
    ++t_;
    const double correction1 = 1.0 - std::pow(config_.adam_beta1, t_);
    const double correction2 = 1.0 - std::pow(config_.adam_beta2, t_);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const Slot& s = slots[i];
      Eigen::Map<Eigen::VectorXd> p(s.param, s.size);
      Eigen::Map<const Eigen::VectorXd> g(s.grad, s.size);
      Eigen::VectorXd& m = state_m_[i];
      Eigen::VectorXd& v = state_v_[i];
      m = config_.adam_beta1 * m + (1.0 - config_.adam_beta1) * g;
      v = config_.adam_beta2 * v.array().matrix() +
          (1.0 - config_.adam_beta2) * g.array().square().matrix();
      const Eigen::ArrayXd m_hat = m.array() / correction1;
      const Eigen::ArrayXd v_hat = v.array() / correction2;
      p.array() -= config_.learning_rate * m_hat /
                   (v_hat.sqrt() + config_.adam_epsilon);
      if (s.decay && config_.weight_decay > 0.0) {
        p.array() *= 1.0 - config_.learning_rate * config_.weight_decay;
      }
    }
  }

 private:
  TrainConfig config_;
  int t_ = 0;
  std::vector<Eigen::VectorXd> state_m_;
  std::vector<Eigen::VectorXd> state_v_;
};

/// Shuffled-epoch batch iterator; reshuffles with the same stream each epoch.
class BatchSchedule {
 public:
  BatchSchedule(std::int64_t n, int batch_size, std::uint64_t seed)
      : order_(n), batch_size_(batch_size), rng_(seed, "batch-order") {
    std::iota(order_.begin(), order_.end(), 0);
    shuffle();
  }

  std::vector<std::int64_t> next() {
    std::vector<std::int64_t> batch;
    batch.reserve(batch_size_);
    for (int i = 0; i < batch_size_; ++i) {
      if (cursor_ == static_cast<std::int64_t>(order_.size())) {
        shuffle();
        cursor_ = 0;
      }
      batch.push_back(order_[cursor_++]);
    }
    return batch;
  }

 private:
  void shuffle() {
    for (std::int64_t i = static_cast<std::int64_t>(order_.size()) - 1; i > 0;
         --i) {
      const auto j = static_cast<std::int64_t>(
          rng_.next_below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order_[i], order_[j]);
    }
  }

  std::vector<std::int64_t> order_;
  int batch_size_ = 0;
  std::int64_t cursor_ = 0;
  Rng rng_;
};

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x,
                            const std::vector<std::int64_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = x.row(rows[i]);
  return out;
}

/// Group-stratified validation split (validation gets ceil(frac * n_g) of
/// each group, never all of a group's samples).
void stratified_split(const std::vector<Group>& labels, double fraction,
                      std::uint64_t seed, std::vector<std::int64_t>* train_idx,
                      std::vector<std::int64_t>* val_idx) {
  std::map<std::vector<int>, std::vector<std::int64_t>> by_group;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_group[labels[i].values].push_back(static_cast<std::int64_t>(i));
  }
  Rng rng(seed, "val-split");
  for (auto& [values, indices] : by_group) {
    for (std::int64_t i = static_cast<std::int64_t>(indices.size()) - 1; i > 0;
         --i) {
      const auto j = static_cast<std::int64_t>(
          rng.next_below(static_cast<std::uint64_t>(i + 1)));
      std::swap(indices[i], indices[j]);
    }
    auto n_val = static_cast<std::int64_t>(
        std::ceil(fraction * static_cast<double>(indices.size())));
    n_val = std::min<std::int64_t>(
        n_val, static_cast<std::int64_t>(indices.size()) - 1);
    n_val = std::max<std::int64_t>(n_val, 0);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      if (static_cast<std::int64_t>(k) < n_val) {
        val_idx->push_back(indices[k]);
      } else {
        train_idx->push_back(indices[k]);
      }
    }
  }
  std::sort(train_idx->begin(), train_idx->end());
  std::sort(val_idx->begin(), val_idx->end());
}

/// Support restricted to groups that actually occur, in scenario order.
GroupSet observed_support(const GroupSet& scenario_support,
                          const std::vector<Group>& labels) {
  GroupSet seen;
  for (const Group& g : labels) seen.insert(g);
  GroupSet support;
  for (const Group& g : scenario_support) {
    if (seen.contains(g)) support.insert(g);
  }
  if (support.empty()) {
    throw Error(Error::Code::kEmptySupport,
                "no training samples fall inside the scenario support");
  }
  return support;
}

}  // namespace

TrainConfig default_train_config(FeatureKind kind) {
  TrainConfig config;
  config.feature_kind = kind;
  config.learning_rate = kind == FeatureKind::kMlp ? 1e-4 : 1e-3;
  return config;
}

EnergyModel fit_crm(const Dataset& train, const ShiftScenario& scenario,
                    const TrainConfig& config) {
  if (config.learning_rate <= 0.0 || config.batch_size < 1) {
    throw Error(Error::Code::kConfig,
                "learning rate must be positive and batch size >= 1");
  }
  for (const Group& g : train.labels) {
    if (!scenario.train_support.contains(g)) {
      throw Error(Error::Code::kSupportMismatch,
                  "training label " + to_string(g) +
                      " outside the scenario train support");
    }
  }

  const bool use_validation = config.early_stop_patience > 0;
  std::vector<std::int64_t> train_idx;
  std::vector<std::int64_t> val_idx;
  if (use_validation) {
    stratified_split(train.labels, config.validation_fraction, config.seed,
                     &train_idx, &val_idx);
  } else {
    train_idx.resize(train.size());
    std::iota(train_idx.begin(), train_idx.end(), 0);
  }

  std::vector<Group> fit_labels;
  fit_labels.reserve(train_idx.size());
  for (std::int64_t i : train_idx) fit_labels.push_back(train.labels[i]);
  const Eigen::MatrixXd fit_x = gather_rows(train.features, train_idx);

  const GroupSet support = observed_support(scenario.train_support, fit_labels);
  const Eigen::VectorXd log_prior = log_prior_from_counts(fit_labels, support);

  EnergyModel model = init_energy_model(
      scenario.attr, static_cast<int>(train.features.cols()),
      config.feature_kind, config.hidden_width, support, log_prior,
      config.seed);

  const std::vector<int> fit_label_idx = support_indices(support, fit_labels);

  Eigen::MatrixXd val_x;
  std::vector<int> val_label_idx;
  if (use_validation && !val_idx.empty()) {
    val_x = gather_rows(train.features, val_idx);
    std::vector<Group> val_labels;
    for (std::int64_t i : val_idx) val_labels.push_back(train.labels[i]);
    val_label_idx = support_indices(support, val_labels);
  }

  Adam adam(config);
  BatchSchedule schedule(static_cast<std::int64_t>(train_idx.size()),
                         config.batch_size, config.seed);

  EnergyModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int evals_since_best = 0;

  for (int step = 0; step < config.steps; ++step) {
    const std::vector<std::int64_t> batch = schedule.next();
    Eigen::MatrixXd batch_x(batch.size(), fit_x.cols());
    std::vector<int> batch_labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      batch_x.row(i) = fit_x.row(batch[i]);
      batch_labels[i] = fit_label_idx[batch[i]];
    }

    LossResult result;
    try {
      result = nll_loss(model, batch_x, batch_labels);
    } catch (const Error& e) {
      if (e.code() == Error::Code::kTrainingDiverged) {
        std::ostringstream msg;
        msg << "training diverged at step " << step << ": " << e.what();
        throw Error(Error::Code::kTrainingDiverged, msg.str());
      }
      throw;
    }

    std::vector<Adam::Slot> slots;
    slots.push_back({model.head.data(), result.grads.d_head.data(),
                     model.head.size(), true});
    slots.push_back({model.bias.data(), result.grads.d_bias.data(),
                     model.bias.size(), config.regularize_bias});
    if (model.feature_map.kind == FeatureKind::kMlp) {
      slots.push_back({model.feature_map.w1.data(), result.grads.d_w1.data(),
                       model.feature_map.w1.size(), true});
      slots.push_back({model.feature_map.b1.data(), result.grads.d_b1.data(),
                       model.feature_map.b1.size(), false});
    }
    adam.step(slots);

    if (use_validation && !val_label_idx.empty() &&
        ((step + 1) % config.validate_every == 0 || step + 1 == config.steps)) {
      const double val_loss = nll_loss(model, val_x, val_label_idx).loss;
      if (val_loss < best_val) {
        best_val = val_loss;
        best = model;
        evals_since_best = 0;
      } else if (++evals_since_best >= config.early_stop_patience) {
        return best;
      }
    }
  }
  return use_validation && !val_label_idx.empty() ? best : model;
}

ExtrapolatedBias extrapolate_bias(const EnergyModel& model,
                                  const Dataset& train,
                                  const GroupSet& target_support,
                                  int bootstrap_resamples,
                                  std::uint64_t bootstrap_seed) {
  if (train.size() == 0) {
    throw Error(Error::Code::kEmptySupport,
                "cannot extrapolate the bias from an empty training set");
  }
  if (target_support.empty()) {
    throw Error(Error::Code::kEmptySupport, "target support is empty");
  }
  const auto n = train.size();
  const int t_count = target_support.size();

  std::vector<std::int64_t> target_flat(t_count);
  for (int t = 0; t < t_count; ++t) {
    target_flat[t] = model.attr.flat_index(target_support.at(t));
  }
  std::vector<std::int64_t> train_flat(model.train_support.size());
  for (int k = 0; k < model.train_support.size(); ++k) {
    train_flat[k] = model.attr.flat_index(model.train_support.at(k));
  }

  // Streaming log-sum-exp of per-sample log ratios, with a running max.
  Eigen::VectorXd run_max =
      Eigen::VectorXd::Constant(t_count, -std::numeric_limits<double>::infinity());
  Eigen::VectorXd run_sum = Eigen::VectorXd::Zero(t_count);
  Eigen::MatrixXd sample_vals;  // kept only when bootstrapping
  if (bootstrap_resamples > 0) sample_vals.resize(n, t_count);

  Eigen::VectorXd train_logit(model.train_support.size());
  for (std::int64_t s = 0; s < n; ++s) {
    const Eigen::VectorXd grid = energy_group_sums(
        energies(model, train.features.row(s).transpose()), model.attr);
    for (int k = 0; k < model.train_support.size(); ++k) {
      train_logit[k] = -grid[train_flat[k]] + model.log_prior[k] - model.bias[k];
    }
    const double lse = logsumexp(train_logit);
    for (int t = 0; t < t_count; ++t) {
      const double val = -grid[target_flat[t]] - lse;
      if (bootstrap_resamples > 0) sample_vals(s, t) = val;
      if (val <= run_max[t]) {
        run_sum[t] += std::exp(val - run_max[t]);
      } else {
        run_sum[t] = run_sum[t] * std::exp(run_max[t] - val) + 1.0;
        run_max[t] = val;
      }
    }
  }

  ExtrapolatedBias result;
  result.support = target_support;
  result.sample_count = n;
  result.values.resize(t_count);
  for (int t = 0; t < t_count; ++t) {
    result.values[t] =
        run_max[t] + std::log(run_sum[t]) - std::log(static_cast<double>(n));
  }

  if (bootstrap_resamples > 0) {
    Eigen::MatrixXd estimates(bootstrap_resamples, t_count);
    Rng rng(bootstrap_seed, "bstar-bootstrap");
    Eigen::VectorXd resample(n);
    for (int b = 0; b < bootstrap_resamples; ++b) {
      std::vector<std::int64_t> pick(n);
      for (std::int64_t s = 0; s < n; ++s) {
        pick[s] = static_cast<std::int64_t>(
            rng.next_below(static_cast<std::uint64_t>(n)));
      }
      for (int t = 0; t < t_count; ++t) {
        for (std::int64_t s = 0; s < n; ++s) resample[s] = sample_vals(pick[s], t);
        estimates(b, t) =
            logsumexp(resample) - std::log(static_cast<double>(n));
      }
    }
    result.bootstrap_se.resize(t_count);
    for (int t = 0; t < t_count; ++t) {
      const double mean = estimates.col(t).mean();
      result.bootstrap_se[t] = std::sqrt(
          (estimates.col(t).array() - mean).square().sum() /
          std::max(1, bootstrap_resamples - 1));
    }
  }
  return result;
}

TestPredictor make_test_predictor(const EnergyModel& model,
                                  const GroupSet& test_support,
                                  const Eigen::VectorXd& test_prior,
                                  const Eigen::VectorXd& bias,
                                  std::string name) {
  if (test_support.empty() || test_prior.size() != test_support.size() ||
      bias.size() != test_support.size()) {
    throw Error(Error::Code::kSupportMismatch,
                "test prior / bias tables must align with the test support");
  }
  TestPredictor predictor;
  predictor.model = model;
  predictor.test_support = test_support;
  predictor.test_log_prior.resize(test_prior.size());
  for (int i = 0; i < test_prior.size(); ++i) {
    predictor.test_log_prior[i] =
        test_prior[i] > 0.0 ? std::log(test_prior[i])
                            : -std::numeric_limits<double>::infinity();
  }
  predictor.bias = bias;
  predictor.name = std::move(name);
  return predictor;
}

TestPredictor crm_predictor(const EnergyModel& model, const Dataset& train,
                            const GroupSet& test_support) {
  const ExtrapolatedBias b_star = extrapolate_bias(model, train, test_support);
  return make_test_predictor(model, test_support,
                             uniform_prior(test_support.size()), b_star.values,
                             "CRM");
}

LogitTable test_logits(const TestPredictor& predictor,
                       const Eigen::VectorXd& x) {
  const Eigen::VectorXd grid = energy_group_sums(
      energies(predictor.model, x), predictor.model.attr);
  LogitTable table;
  table.support = &predictor.test_support;
  table.values.resize(predictor.test_support.size());
  for (int t = 0; t < predictor.test_support.size(); ++t) {
    const std::int64_t flat =
        predictor.model.attr.flat_index(predictor.test_support.at(t));
    table.values[t] =
        -grid[flat] + predictor.test_log_prior[t] - predictor.bias[t];
  }
  return table;
}

Eigen::VectorXd predict(const TestPredictor& predictor,
                        const Eigen::VectorXd& x) {
  return softmax(test_logits(predictor, x).values);
}

Eigen::VectorXd marginalize(const Eigen::VectorXd& post,
                            const GroupSet& support,
                            const AttributeSpec& spec, int attribute) {
  if (attribute < 0 || attribute >= spec.num_attributes()) {
    throw Error(Error::Code::kInvalidArgument, "attribute index out of range");
  }
  if (post.size() != support.size()) {
    throw Error(Error::Code::kSupportMismatch,
                "posterior does not match the support");
  }
  Eigen::VectorXd marginal = Eigen::VectorXd::Zero(spec.cardinality(attribute));
  for (int i = 0; i < support.size(); ++i) {
    marginal[support.at(i).values[attribute]] += post[i];
  }
  return marginal;
}

ErmModel fit_erm_group(const Dataset& train, const ShiftScenario& scenario,
                       const TrainConfig& config) {
  if (config.learning_rate <= 0.0 || config.batch_size < 1) {
    throw Error(Error::Code::kConfig,
                "learning rate must be positive and batch size >= 1");
  }
  const GroupSet support = observed_support(scenario.train_support, train.labels);
  const std::vector<int> label_idx = support_indices(support, train.labels);

  Rng rng(config.seed, "erm-init");
  ErmModel model;
  model.attr = scenario.attr;
  model.input_dim = static_cast<int>(train.features.cols());
  model.feature_map.kind = config.feature_kind;
  model.feature_map.input_dim = model.input_dim;
  if (config.feature_kind == FeatureKind::kMlp) {
    model.feature_map.w1.resize(config.hidden_width, model.input_dim);
    model.feature_map.b1 = Eigen::VectorXd::Zero(config.hidden_width);
    for (int r = 0; r < config.hidden_width; ++r) {
      for (int c = 0; c < model.input_dim; ++c) {
        model.feature_map.w1(r, c) = 0.01 * rng.next_gaussian();
      }
    }
  }
  const int h = model.feature_map.output_dim();
  model.head.resize(support.size(), h);
  for (int r = 0; r < model.head.rows(); ++r) {
    for (int c = 0; c < h; ++c) model.head(r, c) = 0.01 * rng.next_gaussian();
  }
  model.head_bias = Eigen::VectorXd::Zero(support.size());
  model.support = support;

  Adam adam(config);
  BatchSchedule schedule(train.size(), config.batch_size, config.seed);
  for (int step = 0; step < config.steps; ++step) {
    const std::vector<std::int64_t> batch = schedule.next();
    Eigen::MatrixXd batch_x(batch.size(), train.features.cols());
    std::vector<int> batch_labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      batch_x.row(i) = train.features.row(batch[i]);
      batch_labels[i] = label_idx[batch[i]];
    }

    const Eigen::MatrixXd phi = model.feature_map.forward_batch(batch_x);
    Eigen::MatrixXd logits = phi * model.head.transpose();
    logits.rowwise() += model.head_bias.transpose();
    const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
    const Eigen::MatrixXd shifted = logits.colwise() - row_max;
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      loss += std::log(shifted.row(i).array().exp().sum()) + row_max[i] -
              logits(i, batch_labels[i]);
    }
    loss /= static_cast<double>(batch.size());
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "training diverged at step " << step;
      throw Error(Error::Code::kTrainingDiverged, msg.str());
    }

    Eigen::MatrixXd dlogits = (shifted.array().exp().colwise() /
                               shifted.array().exp().rowwise().sum())
                                  .matrix();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      dlogits(i, batch_labels[i]) -= 1.0;
    }
    dlogits /= static_cast<double>(batch.size());

    const Eigen::MatrixXd d_head = dlogits.transpose() * phi;
    const Eigen::VectorXd d_head_bias = dlogits.colwise().sum().transpose();
    Eigen::MatrixXd d_w1;
    Eigen::VectorXd d_b1;
    std::vector<Adam::Slot> slots;
    slots.push_back({model.head.data(), d_head.data(), model.head.size(), true});
    slots.push_back({model.head_bias.data(), d_head_bias.data(),
                     model.head_bias.size(), false});
    if (model.feature_map.kind == FeatureKind::kMlp) {
      Eigen::MatrixXd dphi = dlogits * model.head;
      dphi.array() *= (1.0 - phi.array().square());
      d_w1 = dphi.transpose() * batch_x;
      d_b1 = dphi.colwise().sum().transpose();
      slots.push_back({model.feature_map.w1.data(), d_w1.data(),
                       model.feature_map.w1.size(), true});
      slots.push_back({model.feature_map.b1.data(), d_b1.data(),
                       model.feature_map.b1.size(), false});
    }
    adam.step(slots);
  }
  return model;
}

Eigen::VectorXd predict_erm(const ErmModel& model, const Eigen::VectorXd& x) {
  const Eigen::VectorXd logits =
      model.head * model.feature_map.forward(x) + model.head_bias;
  return softmax(logits);
}

std::vector<TestPredictor> ablation_variants(
    const EnergyModel& model, const Dataset& train,
    const ShiftScenario& scenario, const std::vector<Group>& test_labels) {
  const GroupSet& test_support = scenario.test_support;
  const ExtrapolatedBias b_star = extrapolate_bias(model, train, test_support);

  // Trained bias where defined, 0 (the initialization value) for groups
  // never seen at training time.
  Eigen::VectorXd b_hat = Eigen::VectorXd::Zero(test_support.size());
  for (int t = 0; t < test_support.size(); ++t) {
    const int k = model.train_support.index_of(test_support.at(t));
    if (k >= 0) b_hat[t] = model.bias[k];
  }

  const Eigen::VectorXd unf = uniform_prior(test_support.size());
  const Eigen::VectorXd emp = empirical_prior(test_labels, test_support);

  std::vector<TestPredictor> variants;
  variants.push_back(
      make_test_predictor(model, test_support, unf, b_star.values, "CRM"));
  variants.push_back(make_test_predictor(model, test_support, emp,
                                         b_star.values,
                                         "Bias B*+Emp Prior"));
  variants.push_back(make_test_predictor(model, test_support, unf, b_hat,
                                         "Bias B̂+Unf Prior"));
  variants.push_back(make_test_predictor(model, test_support, emp, b_hat,
                                         "Bias B̂+Emp Prior"));
  return variants;
}

double compositional_risk(const std::vector<Eigen::VectorXd>& posteriors,
                          const GroupSet& support,
                          const std::vector<Group>& labels) {
  if (posteriors.size() != labels.size() || labels.empty()) {
    throw Error(Error::Code::kInvalidArgument,
                "posterior and label lists must have equal nonzero length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int idx = support.index_of(labels[i]);
    if (idx < 0 || posteriors[i][idx] <= 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    total += -std::log(posteriors[i][idx]);
  }
  return total / static_cast<double>(labels.size());
}

}  // namespace crm
