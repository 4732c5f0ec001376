#pragma once

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/core/random.hpp>
#include <wcpfnn/data/dataset.hpp>
#include <wcpfnn/grid/quadratic_forms.hpp>
#include <wcpfnn/nn/losses.hpp>
#include <wcpfnn/nn/mlp.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace wcpfnn::nn {

struct TrainingConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int epochs = 600;
    double lambda0 = 1.0;
    double lambda_pf = 0.1;
    std::size_t batch_size = 0;  // 0 = full batch
    std::uint64_t seed = 0;

    void check() const {
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (lambda0 < 0.0 || lambda_pf < 0.0) throw ConfigError("loss weights must be nonnegative");
        if (lambda0 == 0.0 && lambda_pf == 0.0) throw ConfigError("loss weights cannot both be zero");
        if (epochs < 0) throw ConfigError("epochs must be nonnegative");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0,1)");
        if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
    }
};

// Training samples as column blocks. Label columns of unlabeled samples are
// zero and masked out of L0.
struct Batch {
    Eigen::MatrixXd demand;
    Eigen::MatrixXd generation;
    Eigen::MatrixXd voltage;
    std::vector<char> labeled;
    std::size_t labeled_count = 0;

    Eigen::Index size() const { return demand.cols(); }
};

// Builds a batch from samples. With read_labels = false the label matrices stay
// empty and every sample counts as unlabeled.
inline Batch make_batch(const std::vector<const data::Sample*>& samples, const grid::QuadraticFormModel& qf,
                        bool read_labels = true) {
    Batch b;
    const auto n = static_cast<Eigen::Index>(samples.size());
    b.demand.resize(static_cast<Eigen::Index>(qf.demand_dim()), n);
    b.labeled.assign(samples.size(), 0);
    if (read_labels) {
        b.generation = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(qf.generation_dim()), n);
        b.voltage = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(qf.voltage_dim()), n);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = *samples[static_cast<std::size_t>(i)];
        require_dimension(static_cast<std::size_t>(s.demand.size()), qf.demand_dim(), "sample demand");
        b.demand.col(i) = s.demand;
        if (read_labels && s.labeled) {
            b.generation.col(i) = *s.generation;
            b.voltage.col(i) = *s.voltage;
            b.labeled[static_cast<std::size_t>(i)] = 1;
            ++b.labeled_count;
        }
    }
    return b;
}

inline Batch make_batch(const data::Dataset& ds, data::Split split, const grid::QuadraticFormModel& qf,
                        bool read_labels = true) {
    return make_batch(ds.select(split), qf, read_labels);
}

// Forward pass that keeps what backpropagation needs.
struct Tape {
    std::vector<Eigen::MatrixXd> inputs;  // input of each layer (normalized input first)
    Eigen::MatrixXd output;               // after the output map
};

inline Tape forward_tape(const MlpParams& net, const Eigen::Ref<const Eigen::MatrixXd>& d) {
    Tape t;
    Eigen::MatrixXd a = net.input_map.apply_columns(d);
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        t.inputs.push_back(a);
        Eigen::MatrixXd z = (l.weights * a).colwise() + l.biases;
        a = k + 1 < net.layers.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    }
    t.output = net.output_map.apply_columns(a);
    return t;
}

// Gradients of a loss with respect to every weight and bias, given the loss
// gradient with respect to the (mapped) outputs. ReLU derivative at 0 is 0.
inline std::vector<Layer> backprop(const MlpParams& net, const Tape& tape, const Eigen::Ref<const Eigen::MatrixXd>& d_output) {
    std::vector<Layer> grads(net.layers.size());
    Eigen::MatrixXd delta = net.output_map.scale.asDiagonal() * d_output;
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        const auto& l = net.layers[k];
        grads[k].weights = delta * tape.inputs[k].transpose();
        grads[k].biases = delta.rowwise().sum();
        if (k == 0) break;
        Eigen::MatrixXd back = l.weights.transpose() * delta;
        // tape.inputs[k] is the ReLU output of layer k-1: positive exactly where Zhat > 0.
        delta = back.cwiseProduct((tape.inputs[k].array() > 0.0).cast<double>().matrix());
    }
    return grads;
}

struct PairGradients {
    std::vector<Layer> G;
    std::vector<Layer> v;
};

struct LossWeights {
    double lambda0 = 1.0;
    double lambda_pf = 0.1;
};

// Combined loss Lambda0 (L0_G + L0_v) + LambdaPF L_PF and, optionally, its
// exact (sub)gradients. L0 averages over labeled samples, L_PF over all.
inline LossBreakdown evaluate_loss(const PfnnPair& pair, const Batch& batch, const grid::QuadraticFormModel& qf,
                                   const LossWeights& w, PairGradients* grads = nullptr) {
    const Eigen::Index n = batch.size();
    LossBreakdown out;
    const Tape tg = forward_tape(pair.net_G, batch.demand);
    const Tape tv = forward_tape(pair.net_v, batch.demand);
    Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(tg.output.rows(), n);
    Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(tv.output.rows(), n);

    if (w.lambda0 > 0.0 && batch.labeled_count > 0) {
        const double m = static_cast<double>(batch.labeled_count);
        const double cg = w.lambda0 / (m * static_cast<double>(tg.output.rows()));
        const double cv = w.lambda0 / (m * static_cast<double>(tv.output.rows()));
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!batch.labeled[static_cast<std::size_t>(i)]) continue;
            const Eigen::VectorXd eg = tg.output.col(i) - batch.generation.col(i);
            const Eigen::VectorXd ev = tv.output.col(i) - batch.voltage.col(i);
            out.l0_G += eg.cwiseAbs().sum() / static_cast<double>(eg.size());
            out.l0_v += ev.cwiseAbs().sum() / static_cast<double>(ev.size());
            if (grads) {
                dg.col(i) += cg * eg.unaryExpr([](double x) { return sign0(x); });
                dv.col(i) += cv * ev.unaryExpr([](double x) { return sign0(x); });
            }
        }
        out.l0_G /= m;
        out.l0_v /= m;
    }
    if (w.lambda_pf > 0.0 && n > 0) {
        const double scale = w.lambda_pf / static_cast<double>(n);
        Eigen::VectorXd gg(tg.output.rows()), gv(tv.output.rows());
        for (Eigen::Index i = 0; i < n; ++i) {
            if (grads) {
                gg.setZero();
                gv.setZero();
                out.l_pf += pf_violation(qf, batch.demand.col(i), tg.output.col(i), tv.output.col(i), scale, &gg, &gv);
                dg.col(i) += gg;
                dv.col(i) += gv;
            } else {
                out.l_pf += pf_violation(qf, batch.demand.col(i), tg.output.col(i), tv.output.col(i));
            }
        }
        out.l_pf /= static_cast<double>(n);
    }
    out.total = w.lambda0 * (out.l0_G + out.l0_v) + w.lambda_pf * out.l_pf;
    if (grads) {
        grads->G = backprop(pair.net_G, tg, dg);
        grads->v = backprop(pair.net_v, tv, dv);
    }
    return out;
}

struct AdamState {
    std::vector<Layer> m;
    std::vector<Layer> v;
    long step = 0;
};

// One bias-corrected Adam update.
inline void adam_step(std::vector<Layer>& params, const std::vector<Layer>& grads, AdamState& st, const TrainingConfig& cfg) {
    if (grads.size() != params.size()) throw DimensionError("gradient and parameter layer counts differ");
    if (st.m.empty()) {
        for (const auto& p : params) {
            st.m.push_back({Eigen::MatrixXd::Zero(p.weights.rows(), p.weights.cols()), Eigen::VectorXd::Zero(p.biases.size())});
            st.v.push_back(st.m.back());
        }
    }
    ++st.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        p.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
    };
    for (std::size_t k = 0; k < params.size(); ++k) {
        update(params[k].weights, grads[k].weights, st.m[k].weights, st.v[k].weights);
        update(params[k].biases, grads[k].biases, st.m[k].biases, st.v[k].biases);
    }
}

// Called after the listed epochs complete; may modify the network pair and the
// dataset (the training batch is rebuilt afterwards).
struct TrainingHooks {
    std::set<int> epochs;
    std::function<void(int epoch, PfnnPair& pair, data::Dataset& ds)> on_epoch;
};

struct TrainResult {
    std::vector<LossBreakdown> history;  // loss on the training batch before each epoch's update
};

// Trains on the training split of `ds`.
inline TrainResult train(PfnnPair& pair, data::Dataset& ds, const grid::QuadraticFormModel& qf, const TrainingConfig& cfg,
                         const TrainingHooks& hooks = {}) {
    cfg.check();
    pair.net_G.check();
    pair.net_v.check();
    const LossWeights w{cfg.lambda0, cfg.lambda_pf};
    const bool read_labels = cfg.lambda0 > 0.0;
    Batch full = make_batch(ds, data::Split::Train, qf, read_labels);
    if (full.size() == 0 && cfg.epochs > 0) throw ValidationError("training split is empty");

    AdamState st_G, st_v;
    TrainResult res;
    PairGradients grads;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const std::size_t n = static_cast<std::size_t>(full.size());
        if (cfg.batch_size == 0 || cfg.batch_size >= n) {
            const LossBreakdown l = evaluate_loss(pair, full, qf, w, &grads);
            if (!std::isfinite(l.total)) throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
            res.history.push_back(l);
            adam_step(pair.net_G.layers, grads.G, st_G, cfg);
            adam_step(pair.net_v.layers, grads.v, st_v, cfg);
        } else {
            res.history.push_back(evaluate_loss(pair, full, qf, w));
            if (!std::isfinite(res.history.back().total)) {
                throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
            }
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
            rng.shuffle(order);
            for (std::size_t start = 0; start < n; start += cfg.batch_size) {
                const std::size_t stop = std::min(n, start + cfg.batch_size);
                Batch mb;
                const auto m = static_cast<Eigen::Index>(stop - start);
                mb.demand.resize(full.demand.rows(), m);
                if (read_labels) {
                    mb.generation.resize(full.generation.rows(), m);
                    mb.voltage.resize(full.voltage.rows(), m);
                }
                for (std::size_t k = start; k < stop; ++k) {
                    const auto src = static_cast<Eigen::Index>(order[k]);
                    const auto dst = static_cast<Eigen::Index>(k - start);
                    mb.demand.col(dst) = full.demand.col(src);
                    if (read_labels) {
                        mb.generation.col(dst) = full.generation.col(src);
                        mb.voltage.col(dst) = full.voltage.col(src);
                    }
                    mb.labeled.push_back(full.labeled[order[k]]);
                    mb.labeled_count += static_cast<std::size_t>(full.labeled[order[k]]);
                }
                evaluate_loss(pair, mb, qf, w, &grads);
                adam_step(pair.net_G.layers, grads.G, st_G, cfg);
                adam_step(pair.net_v.layers, grads.v, st_v, cfg);
            }
        }
        if (hooks.on_epoch && hooks.epochs.count(epoch)) {
            hooks.on_epoch(epoch, pair, ds);
            full = make_batch(ds, data::Split::Train, qf, read_labels);
        }
    }
    return res;
}

// Hook epochs of the enrichment schedule: T_int, T_int + T_enr, ... strictly before T.
inline std::set<int> enrichment_epochs(int total, int initial, int interval) {
    if (interval < 1) throw ConfigError("enrichment interval must be >= 1");
    std::set<int> out;
    for (int e = initial; e < total; e += interval) {
        if (e >= 1) out.insert(e);
    }
    return out;
}

}  // namespace wcpfnn::nn
